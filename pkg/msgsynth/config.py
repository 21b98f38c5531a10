"""
Runtime settings for the toolkit.

Defaults can be overridden through environment variables (optionally kept in a
``.env`` file next to the working directory). Command-line flags always win
over anything configured here.
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Bounds and integration endpoints used when flags are omitted."""

    linearization_cap: int = 12
    channel_bound: int = 4
    max_configs: int = 100_000
    visit_bound: int = 3
    event_cap: int = 12
    max_steps: int = 200
    seed: int = 0
    log_level: str = "WARNING"
    lineage_url: Optional[str] = None
    lineage_namespace: str = "msg-synthesis"


def _int_setting(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def load_settings(dotenv_path: Optional[str] = None) -> Settings:
    """Read settings from the environment (and ``.env`` if present)."""
    load_dotenv(dotenv_path=dotenv_path, override=False)
    defaults = Settings()

    settings = Settings(
        linearization_cap=_int_setting(
            "MSGSYNTH_LINEARIZATION_CAP", defaults.linearization_cap
        ),
        channel_bound=_int_setting("MSGSYNTH_CHANNEL_BOUND", defaults.channel_bound),
        max_configs=_int_setting("MSGSYNTH_MAX_CONFIGS", defaults.max_configs),
        visit_bound=_int_setting("MSGSYNTH_VISIT_BOUND", defaults.visit_bound),
        event_cap=_int_setting("MSGSYNTH_EVENT_CAP", defaults.event_cap),
        max_steps=_int_setting("MSGSYNTH_MAX_STEPS", defaults.max_steps),
        seed=_int_setting("MSGSYNTH_SEED", defaults.seed),
        log_level=os.getenv("MSGSYNTH_LOG_LEVEL", defaults.log_level).upper(),
        lineage_url=os.getenv("MSGSYNTH_LINEAGE_URL") or None,
        lineage_namespace=os.getenv(
            "MSGSYNTH_LINEAGE_NAMESPACE", defaults.lineage_namespace
        ),
    )
    logger.debug(f"Loaded settings: {settings}")
    return settings
