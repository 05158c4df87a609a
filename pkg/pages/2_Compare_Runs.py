import matplotlib.pyplot as plt
import streamlit as st

st.set_page_config(layout="wide")

from dragfl.cli import compare_table
from dragfl.errors import ManifestMismatchError
from run_store import list_runs, load_metrics, output_root, run_label


def app():
    st.title("Compare Runs")

    root = output_root()
    runs = list_runs(root)
    labels = [run_label(root, r) for r in runs]
    if len(labels) < 2:
        st.warning(f"Need at least two runs below {root} to compare")
        st.stop()

    chosen = st.multiselect("Runs (one of them FedAvg)", labels, default=labels[: min(3, len(labels))])
    if len(chosen) < 2:
        st.info("Select at least two runs.")
        return
    dirs = [runs[labels.index(c)] for c in chosen]

    try:
        table = compare_table(dirs)
    except ManifestMismatchError as e:
        st.error(str(e))
        return

    fig, ax = plt.subplots(figsize=(8.5, 5.0))
    for label, run_dir in zip(chosen, dirs):
        df = load_metrics(str(run_dir))
        ax.plot(df["round"], df["test_accuracy"], label=label)
    ax.set_xlabel("Round")
    ax.set_ylabel("Test accuracy")
    ax.grid(True, alpha=0.3)
    ax.legend()

    left, right = st.columns([3, 2], gap="large")
    with left:
        st.pyplot(fig, use_container_width=True)
    with right:
        st.dataframe(table, use_container_width=True)
        st.download_button("Download comparison", table.to_csv(index=False), file_name="comparison.csv", mime="text/csv")

app()
