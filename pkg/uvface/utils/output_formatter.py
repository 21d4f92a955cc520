"""Output formatting utilities using Rich."""

from typing import Any, Dict, Iterable, Mapping, NamedTuple

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from ..core.losses import format_values
from ..models.camera import ProjectionParams
from ..models.fitting import FitResult


class GradcheckRow(NamedTuple):
    """Outcome of one finite-difference check."""

    name: str
    max_rel_error: float
    tolerance: float
    passed: bool


class OutputFormatter:
    """Handles formatting and displaying fit results in the terminal."""

    def __init__(self, enable_colors: bool = True):
        """
        Initialize the output formatter.

        Args:
            enable_colors: Whether to enable colored output
        """
        self.console = Console(force_terminal=enable_colors)
        self.error_console = Console(stderr=True, force_terminal=enable_colors)
        self.enable_colors = enable_colors

    def display_fit_result(self, result: FitResult, raw_output: bool = False) -> None:
        """
        Display a fit result.

        Args:
            result: The fit to display
            raw_output: Print plain key: value lines, and the loss breakdown as
                name=value lines, instead of panels
        """
        if raw_output:
            self._display_raw_fit(result)
        else:
            self._display_formatted_fit(result)

    def _display_formatted_fit(self, result: FitResult) -> None:
        color = "green" if result.termination == "converged" else "yellow"
        summary = (
            f"Final loss: {result.final_loss:.6g}\n"
            f"Iterations: {result.iterations} "
            f"(rejected steps: {result.rejected_steps})\n"
            f"Termination: [{color}]{result.termination}[/{color}]"
        )
        if result.nme is not None:
            summary += f"\nNME: {result.nme:.4%}"
        self.console.print()
        self.console.print(
            Panel(
                summary,
                title="[bold blue]Fit Summary[/bold blue]",
                border_style="blue",
            )
        )

        if result.projection is not None:
            self.console.print()
            self.console.print(self._projection_table(result.projection))

        if result.breakdown:
            self.console.print()
            self.display_breakdown(result.breakdown)

    def _raw(self, text: str) -> None:
        self.console.print(text, soft_wrap=True, markup=False, highlight=False)

    def _display_raw_fit(self, result: FitResult) -> None:
        self._raw(f"final_loss: {result.final_loss!r}")
        self._raw(f"iterations: {result.iterations}")
        self._raw(f"rejected_steps: {result.rejected_steps}")
        self._raw(f"termination: {result.termination}")
        if result.nme is not None:
            self._raw(f"nme: {result.nme!r}")
        if result.projection is not None:
            values = " ".join(repr(x) for x in result.projection.to_vector().tolist())
            self._raw(f"m: {values}")
        if result.breakdown:
            self._raw(format_values(result.breakdown))

    def _projection_table(self, projection: ProjectionParams) -> Table:
        table = Table(title="[bold green]Projection[/bold green]")
        table.add_column("Parameter", style="cyan")
        table.add_column("Value", style="magenta", justify="right")
        for name, value in zip(ProjectionParams.ORDER, projection.to_vector()):
            table.add_row(name, f"{value:.6g}")
        return table

    def display_breakdown(self, breakdown: Mapping[str, float]) -> None:
        """Display weighted loss terms."""
        table = Table(title="[bold yellow]Loss Breakdown[/bold yellow]")
        table.add_column("Term", style="cyan")
        table.add_column("Value", style="magenta", justify="right")
        for name, value in breakdown.items():
            style = "bold" if name == "total" else ""
            table.add_row(name, f"{value:.6g}", style=style)
        self.console.print(table)

    def display_gradcheck(
        self, rows: Iterable[GradcheckRow], raw_output: bool = False
    ) -> None:
        """
        Display finite-difference check outcomes.

        Args:
            rows: One row per checked operation
            raw_output: Print one line per check instead of a table
        """
        rows = list(rows)
        if raw_output:
            for row in rows:
                status = "PASS" if row.passed else "FAIL"
                self._raw(
                    f"{row.name} {row.max_rel_error:.3e} {row.tolerance:.0e} {status}"
                )
            return

        table = Table(title="[bold]Gradient Check[/bold]")
        table.add_column("Check", style="cyan")
        table.add_column("Max rel. error", justify="right")
        table.add_column("Tolerance", justify="right")
        table.add_column("Status")
        for row in rows:
            status = "[green]PASS[/green]" if row.passed else "[red]FAIL[/red]"
            table.add_row(
                row.name, f"{row.max_rel_error:.3e}", f"{row.tolerance:.0e}", status
            )
        self.console.print(table)

    def display_config(self, values: Dict[str, Any]) -> None:
        """Display effective configuration values."""
        table = Table(title="[bold blue]Configuration[/bold blue]")
        table.add_column("Key", style="cyan")
        table.add_column("Value", style="magenta")
        for key, value in values.items():
            table.add_row(key, "[dim]default[/dim]" if value is None else str(value))
        self.console.print(table)

    def display_error(self, message: str, hint: str = "") -> None:
        """Print an error, and an optional hint, to stderr."""
        self.error_console.print(
            f"[red]Error:[/red] {escape(message)}", soft_wrap=True
        )
        if hint:
            self.error_console.print(f"[yellow]{escape(hint)}[/yellow]")
