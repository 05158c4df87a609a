import matplotlib.pyplot as plt
import pandas as pd
import streamlit as st

st.set_page_config(layout="wide")

from run_store import list_runs, load_manifest, load_metrics, output_root, run_label

CURVES = {
    "Training loss": "train_loss",
    "Test accuracy": "test_accuracy",
    "Squared gradient norm": "grad_norm_sq",
    "Mean degree of divergence": "mean_lambda",
    "Max degree of divergence": "max_lambda",
}


def pick_run():
    root = output_root()
    runs = list_runs(root)
    if not runs:
        st.warning(f"No runs with a manifest.json below {root}")
        st.stop()
    labels = [run_label(root, r) for r in runs]
    chosen = st.sidebar.selectbox("Run", labels)
    return runs[labels.index(chosen)]


def curves_simple(run_dir):
    """One line chart per metric, native Streamlit charts."""
    df = load_metrics(str(run_dir)).set_index("round")
    for title, column in CURVES.items():
        series = df[column].dropna()
        if series.empty:
            continue
        st.subheader(title)
        st.line_chart(series)


def curves_with_manifest(run_dir):
    """Accuracy and loss side by side with the run manifest and raw metrics."""
    df = load_metrics(str(run_dir))
    manifest = load_manifest(str(run_dir))
    config = manifest["config"]

    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(11, 4.0))
    ax_acc.plot(df["round"], df["test_accuracy"], marker=".")
    if config.get("target_accuracy") is not None:
        ax_acc.axhline(config["target_accuracy"], color="grey", linestyle="--", label="target")
        ax_acc.legend()
    ax_acc.set_xlabel("Round")
    ax_acc.set_ylabel("Test accuracy")
    ax_acc.grid(True, alpha=0.3)
    ax_loss.plot(df["round"], df["train_loss"], marker=".", color="tab:red")
    ax_loss.set_yscale("log")
    ax_loss.set_xlabel("Round")
    ax_loss.set_ylabel("Training loss")
    ax_loss.grid(True, alpha=0.3)
    fig.suptitle(f"{manifest['aggregator']} - {manifest['outcome']} after {manifest['rounds_used']} rounds")

    left, right = st.columns([3, 2], gap="large")
    with left:
        st.pyplot(fig, use_container_width=True)
        st.dataframe(df, use_container_width=True)
    with right:
        st.metric("Rounds used", manifest["rounds_used"])
        if manifest.get("final_test_accuracy") is not None:
            st.metric("Final test accuracy", f"{manifest['final_test_accuracy']:.4f}")
        st.json(manifest)
        st.download_button("Download metrics.csv", df.to_csv(index=False), file_name="metrics.csv", mime="text/csv")


def attack_overview(run_dir):
    """Divergence degrees against the number of attackers in each round."""
    df = load_metrics(str(run_dir))
    if df["mean_lambda"].isna().all():
        st.info("FedAvg runs carry no degree of divergence.")
        return
    fig, ax = plt.subplots(figsize=(8.5, 4.0))
    ax.plot(df["round"], df["mean_lambda"], label="mean")
    ax.plot(df["round"], df["max_lambda"], label="max", alpha=0.7)
    ax.set_xlabel("Round")
    ax.set_ylabel("Degree of divergence")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper left")
    if df["num_attackers"].any():
        twin = ax.twinx()
        twin.bar(df["round"], df["num_attackers"], alpha=0.2, color="tab:red")
        twin.set_ylabel("Attackers in round")
    st.pyplot(fig, use_container_width=True)
    st.dataframe(pd.DataFrame({
        "rounds with attackers": [int((df["num_attackers"] > 0).sum())],
        "peak max degree": [float(df["max_lambda"].max())],
    }))


def app():
    st.title("Run Explorer")

    run_dir = pick_run()

    apps = [
        "CURVES WITH MANIFEST",
        "CURVES SIMPLE",
        "DIVERGENCE AND ATTACKERS",
    ]

    selected_app = st.selectbox("Select a view", apps)

    if selected_app == "CURVES WITH MANIFEST":
        curves_with_manifest(run_dir)
    elif selected_app == "CURVES SIMPLE":
        curves_simple(run_dir)
    elif selected_app == "DIVERGENCE AND ATTACKERS":
        attack_overview(run_dir)

app()
