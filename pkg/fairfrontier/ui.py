"""
fairfrontier Terminal Output

Rich-based tables and panels for estimation, test, policy and Monte Carlo
summaries.
"""

import sys
from typing import Any, Dict, List, Optional

try:
    from rich.console import Console
    from rich.panel import Panel
    from rich.table import Table
    from rich import box
except ImportError:
    print("Error: 'rich' library is required. Install with: pip install rich")
    sys.exit(1)

import pandas as pd

from . import __version__


console = Console()


def _num(value: Any, digits: int = 4) -> str:
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    return f"{value:.{digits}f}"


def show_banner(command: str):
    """Display the run header."""
    console.print(Panel(
        f"[bold white]Command:[/] [cyan]{command}[/]  |  [bold white]Version:[/] [red]{__version__}[/]",
        title="[bold white]fairfrontier - Fairness-Accuracy Frontier[/]",
        border_style="cyan",
        box=box.ROUNDED
    ))


def show_success(message: str):
    """Display success message."""
    console.print(f"\n[bold green]✓[/] {message}")


def show_error(message: str):
    """Display error message."""
    console.print(f"\n[bold red]✗[/] {message}")


def show_warning(message: str):
    """Display warning message."""
    console.print(f"\n[bold yellow]![/] {message}")


def show_points(points: Dict[str, Any], title: str = "Estimated Points"):
    """Display named risk pairs."""
    table = Table(title=title, box=box.ROUNDED)
    table.add_column("Point", style="magenta")
    table.add_column("e_r", style="cyan", justify="right")
    table.add_column("e_b", style="cyan", justify="right")
    for name, point in points.items():
        if point is None:
            table.add_row(name, "-", "-")
        else:
            table.add_row(name, _num(point.e_r), _num(point.e_b))
    console.print(table)


def show_test_results(results: List[Dict[str, Any]]):
    """Tests in the layout of the LDA-test and confidence-set results table."""
    if not results:
        console.print("[yellow]No tests run[/]")
        return

    table = Table(title="Test Results", box=box.ROUNDED)
    table.add_column("Test", style="magenta")
    table.add_column("n", style="dim", justify="right")
    table.add_column("Statistic", style="white", justify="right")
    table.add_column("Critical", style="white", justify="right")
    table.add_column("Decision", style="white")
    table.add_column("Interval", style="cyan")

    for r in results:
        if "decision" in r:
            style = "red" if r["decision"] else "green"
            decision = f"[{style}]{'reject' if r['decision'] else 'fail to reject'}[/]"
        else:
            decision = "-"
        interval = f"[{_num(r['lo'])}, {_num(r['hi'])}]" if "lo" in r else "-"
        table.add_row(
            str(r.get("test", "-")),
            str(r.get("n", "-")),
            _num(r.get("statistic", r.get("estimate"))),
            _num(r.get("critical_value")),
            decision,
            interval
        )

    console.print(table)


def show_policy_summary(summary: Dict[str, Any]):
    """Display an evaluated policy."""
    table = Table(title="Policy", box=box.ROUNDED)
    table.add_column("Field", style="magenta")
    table.add_column("Value", style="white")
    for key in ("rule", "q", "cutoff", "capacity", "treated_train", "treated_eval", "e_r", "e_b", "preferred"):
        if key in summary:
            value = summary[key]
            if isinstance(value, list):
                value = "(" + ", ".join(_num(v) for v in value) + ")"
            elif isinstance(value, float):
                value = _num(value)
            table.add_row(key, str(value))
    console.print(table)


def show_mc_table(frame: pd.DataFrame, failures: Optional[Dict[str, int]] = None):
    """Display Monte Carlo rejection rates with standard errors."""
    table = Table(title="Rejection Rates", box=box.ROUNDED)
    rate_cols = [c for c in frame.columns if c not in ("n", "dgp", "reps", "failed") and not c.endswith(" se")]
    table.add_column("n", style="dim", justify="right")
    table.add_column("DGP", style="magenta")
    for col in rate_cols:
        table.add_column(col, style="white", justify="right")
    for _, row in frame.iterrows():
        cells = [f"{_num(row[c], 3)} ({_num(row[c + ' se'], 3)})" for c in rate_cols]
        table.add_row(str(row["n"]), str(row["dgp"]), *cells)
    console.print(table)

    if failures and any(failures.values()):
        failed = ", ".join(f"{k}: {v}" for k, v in failures.items() if v)
        show_warning(f"Failed replications excluded: {failed}")
