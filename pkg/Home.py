import streamlit as st

from dragfl import settings

st.set_page_config(layout="wide")

settings.configure_logging()

st.sidebar.info(
    """
    - Run experiments with `python -m dragfl run --config <file> --out <dir>`
    - Point the browser at the output directory via `DRAGFL_OUTPUT_DIR`
    """
)

st.title("DRAG Federated Learning - Run Browser")

st.markdown(
    """
    Browse finished simulator runs. Each run directory holds a `metrics.csv`
    (one row per round) and a `manifest.json` (configuration and outcome).

    - **Run Explorer** plots loss, accuracy, gradient norm and divergence curves of one run.
    - **Compare Runs** lines up rounds-to-target of several aggregators against FedAvg.
    """
)

st.info("Click on the left sidebar menu to navigate to the different pages.")
