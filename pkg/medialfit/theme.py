from __future__ import annotations
from rich.console import Console
from rich.theme import Theme

_theme = Theme({
    "ok": "bold green",
    "warn": "bold yellow",
    "err": "bold red",
    "muted": "grey50",
    "title": "bold white",
    "accent": "cyan",
    "metric": "bold magenta",
})

console = Console(theme=_theme)
print = console.print


def fmt_pct(value: float, digits: int = 4) -> str:
    """Erreur en % de diagonale, stylée pour les tableaux."""
    return f"[metric]{value:.{digits}f}%[/]"


def fmt_bool(ok: bool) -> str:
    return "✅" if ok else "❌"
