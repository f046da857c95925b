"""
Small helpers shared by the experiment layer: table cell formatting and
content hashing.
"""
import hashlib
import math
from typing import Any, Optional

# Rendered for runs that hit the iteration cap or failed.
HYPHEN = '–'


def format_count(value: Optional[int]) -> str:
    """
    Format an iteration counter for a table cell.

    Args:
        value: Counter value, or None for a capped/failed run

    Returns:
        Decimal string or the hyphen
    """
    if value is None:
        return HYPHEN
    return str(int(value))


def format_real(value: Optional[float], digits: int = 4) -> str:
    """Format a real number with fixed decimals; None and NaN become the hyphen."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return HYPHEN
    return f"{value:.{digits}f}"


def format_pair(first: Optional[int], second: Optional[int]) -> str:
    """Render an annotation such as (N_tau,N_gamma)."""
    if first is None or second is None:
        return f"({HYPHEN},{HYPHEN})"
    return f"({int(first)},{int(second)})"


def content_hash(*parts: Any) -> str:
    """Stable short hash of the repr of the given parts."""
    digest = hashlib.sha256('|'.join(repr(p) for p in parts).encode('utf-8'))
    return digest.hexdigest()[:16]


def format_scientific(value: Optional[float], digits: int = 4) -> str:
    """Like format_real, in exponent notation."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return HYPHEN
    return f"{value:.{digits}e}"
