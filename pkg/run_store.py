# run_store.py: locate and load finished runs for the Streamlit pages
import json
from pathlib import Path
from typing import Optional

import pandas as pd
import streamlit as st

from dragfl import settings
from dragfl.cli import MANIFEST_FILE, METRICS_FILE


def _load_from_secrets_or_env(key: str) -> Optional[str]:
    # st.secrets raises when no secrets.toml exists
    try:
        if key in st.secrets:
            return str(st.secrets[key])
    except Exception:
        pass
    return settings.load_setting(key)


def output_root() -> Path:
    """Directory the pages browse; asks in the sidebar when nothing is configured."""
    default = _load_from_secrets_or_env(settings.ENV_OUTPUT_DIR) or ""
    raw = st.sidebar.text_input("Output directory", default)
    if not raw:
        st.info(f"Set {settings.ENV_OUTPUT_DIR} (environment or secrets.toml) or enter a directory in the sidebar.")
        st.stop()
    root = Path(raw).expanduser()
    if not root.is_dir():
        st.error(f"Not a directory: {root}")
        st.stop()
    return root


def list_runs(root: Path) -> list[Path]:
    """Every directory below ``root`` that holds a manifest, sorted by path."""
    return sorted(p.parent for p in root.rglob(MANIFEST_FILE))


@st.cache_data(show_spinner=False)
def load_metrics(run_dir: str) -> pd.DataFrame:
    return pd.read_csv(Path(run_dir) / METRICS_FILE)


@st.cache_data(show_spinner=False)
def load_manifest(run_dir: str) -> dict:
    return json.loads((Path(run_dir) / MANIFEST_FILE).read_text(encoding="utf-8"))


def run_label(root: Path, run_dir: Path) -> str:
    rel = run_dir.relative_to(root)
    return str(rel) if str(rel) != "." else run_dir.name
