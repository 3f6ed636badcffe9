"""Helper toolkit importable by generated analysis scripts as ``insight.tools``.

All helpers are total: malformed input yields a sentinel plus a warning, never
an exception, so a generated script cannot crash inside the toolkit.
"""

from __future__ import annotations

import warnings
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

CANONICAL_ARTIFACTS = ("stat.json", "x_axis.json", "y_axis.json")
CANONICAL_PLOT = "plot.png"

_DATETIME_FORMATS = (
    "%Y-%m-%d",
    "%Y/%m/%d",
    "%d/%m/%Y",
    "%m/%d/%Y",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y%m%d",
    "%b %d, %Y",
    "%d %b %Y",
    "%Y-%m",
    "%Y",
)

_setup_done = False


def setup() -> None:
    """Configure plotting defaults. Safe to call repeatedly and safe to call
    when matplotlib is not installed."""
    global _setup_done
    if _setup_done:
        return
    try:
        import matplotlib

        matplotlib.use("Agg")
        matplotlib.rcParams["font.family"] = "DejaVu Sans"
        matplotlib.rcParams["axes.unicode_minus"] = False
    except Exception:
        pass
    _setup_done = True


def safe_datetime_parse(values: Iterable) -> list[Optional[datetime]]:
    """Parse each value to a datetime; unparseable entries become None with
    one warning per failure."""
    out: list[Optional[datetime]] = []
    for value in values:
        if isinstance(value, datetime):
            out.append(value)
            continue
        parsed = None
        text = str(value).strip()
        if text:
            try:
                parsed = datetime.fromisoformat(text)
            except ValueError:
                for fmt in _DATETIME_FORMATS:
                    try:
                        parsed = datetime.strptime(text, fmt)
                        break
                    except ValueError:
                        continue
        if parsed is None:
            warnings.warn(f"safe_datetime_parse: cannot parse {value!r}", stacklevel=2)
        out.append(parsed)
    return out


def safe_numeric_convert(values: Iterable) -> list[Optional[float]]:
    """Convert each value to a float; unconvertible entries become None with
    one warning per failure. Tolerates thousands separators and % suffixes."""
    out: list[Optional[float]] = []
    for value in values:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            out.append(float(value))
            continue
        text = str(value).strip().replace(",", "").rstrip("%")
        try:
            out.append(float(text))
        except ValueError:
            warnings.warn(f"safe_numeric_convert: cannot convert {value!r}", stacklevel=2)
            out.append(None)
    return out


def _matches_axis(stem: str, axis: str) -> bool:
    compact = stem.replace("-", "").replace("_", "").replace(" ", "")
    return compact in (f"{axis}axis", axis)


def fix_fnames(directory: str | Path = ".") -> list[str]:
    """Rename near-miss artifact files to their canonical names.

    Returns the list of renames performed as "old -> new" strings. A canonical
    file already present is never overwritten.
    """
    root = Path(directory)
    renames: list[str] = []

    def rename(src: Path, canonical: str) -> None:
        target = root / canonical
        if src.name == canonical or target.exists():
            return
        src.rename(target)
        renames.append(f"{src.name} -> {canonical}")

    for path in sorted(root.glob("*.json")):
        stem = path.stem.lower()
        if "stat" in stem:
            rename(path, "stat.json")
        elif _matches_axis(stem, "x"):
            rename(path, "x_axis.json")
        elif _matches_axis(stem, "y"):
            rename(path, "y_axis.json")

    for ext in (".png", ".jpg", ".jpeg"):
        for path in sorted(root.glob(f"*{ext}")):
            rename(path, CANONICAL_PLOT)
            break
    return renames
