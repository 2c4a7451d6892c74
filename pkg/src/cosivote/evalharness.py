"""Accuracy bookkeeping: greedy vs. voting strategies across a gens sweep.

A run record holds, per scope, which pool candidates were individually
correct and which index each voting strategy picked at each generation
count. Reports aggregate those into the four-column layout (greedy,
NFT voting, FT voting, winners-%), one block per scope, one row per gens
value. The winners denominator counts the whole truncated pool including
the greedy candidate: (gens + 1) x samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .diagnosis import CandidateSet, StepScope, truncate_sampled
from .errors import (
    GensOutOfRangeError,
    IncompleteReportError,
    MissingVerdictError,
    MissingWinnerError,
    ZeroDenominatorError,
)

GREEDY_STRATEGY = "greedy"
DEFAULT_GENS_SWEEP = (5, 10, 15, 20)

_SCOPE_LABELS = {
    StepScope.ASSESSMENT: "Assessment",
    StepScope.ANALYSIS: "Analysis",
    StepScope.TREATMENT: "Treatment",
    StepScope.PREVENTION: "Prevention",
    StepScope.WHOLE_OUTPUT: "Whole-output",
}

_HEADER = ("Gens", "Greedy", "%", "Correct-NFT", "%", "Correct-FT", "%", "Winners", "%")


def truncate_pool(cs: CandidateSet, gens: int) -> CandidateSet:
    """Keep the greedy output plus the first `gens` sampled candidates."""
    if not 1 <= gens <= len(cs.sampled):
        raise GensOutOfRangeError(
            f"gens {gens} out of range for {len(cs.sampled)} sampled candidates"
        )
    return truncate_sampled(cs, gens)


@dataclass
class ScopeOutcome:
    """Per-scope correctness of one sample's pool, plus vote winners.

    candidate_correct is pool-aligned: greedy at index 0, sampled after.
    winners maps strategy role -> gens -> winning pool index.
    """

    greedy_correct: bool
    candidate_correct: tuple[bool, ...]
    winners: dict[str, dict[int, int]] = field(default_factory=dict)


@dataclass
class RunRecord:
    sample_id: str
    outcomes: dict[StepScope, ScopeOutcome] = field(default_factory=dict)


def _outcome(record: RunRecord, scope: StepScope) -> ScopeOutcome:
    outcome = record.outcomes.get(scope)
    if outcome is None:
        raise MissingVerdictError(
            f"sample {record.sample_id!r} has no verdicts for scope {scope.value!r}"
        )
    return outcome


def strategy_accuracy(
    records: list[RunRecord], scope: StepScope, gens: int, strategy: str
) -> tuple[int, int]:
    """(correct_count, samples) for one strategy at one generation count.

    strategy is "greedy" or a voting role key present in record winners.
    """
    correct = 0
    for record in records:
        outcome = _outcome(record, scope)
        if strategy == GREEDY_STRATEGY:
            correct += outcome.greedy_correct
            continue
        winner = outcome.winners.get(strategy, {}).get(gens)
        if winner is None:
            raise MissingWinnerError(
                f"sample {record.sample_id!r} has no {strategy!r} winner at gens={gens}"
            )
        if not 0 <= winner < len(outcome.candidate_correct):
            raise MissingVerdictError(
                f"sample {record.sample_id!r}: winner index {winner} outside pool"
            )
        correct += outcome.candidate_correct[winner]
    return correct, len(records)


def winners_pct(records: list[RunRecord], scope: StepScope, gens: int) -> tuple[int, int]:
    """Correct candidates over all candidates in the truncated pools."""
    pool_size = gens + 1
    correct = 0
    for record in records:
        outcome = _outcome(record, scope)
        if len(outcome.candidate_correct) < pool_size:
            raise MissingVerdictError(
                f"sample {record.sample_id!r}: {len(outcome.candidate_correct)} candidate "
                f"verdicts < pool size {pool_size}"
            )
        correct += sum(outcome.candidate_correct[:pool_size])
    return correct, pool_size * len(records)


def format_pct(numerator: int, denominator: int) -> str:
    """100*num/den rounded half-up to one decimal, printed with two.

    Integer arithmetic keeps the half-up rounding exact: 79/90 -> "87.80%",
    784/990 -> "79.20%".
    """
    if denominator <= 0:
        raise ZeroDenominatorError(f"denominator {denominator}")
    tenths = (2000 * numerator + denominator) // (2 * denominator)
    return f"{tenths // 10}.{tenths % 10}0%"


@dataclass(frozen=True)
class ReportCell:
    """One gens row of one scope block, as raw counts."""

    greedy_count: int
    nft_count: int
    ft_count: int
    winners_count: int
    samples: int
    candidates_total: int


@dataclass
class EvaluationReport:
    """scope -> gens -> counts, with Table-style rendering."""

    cells: dict[StepScope, dict[int, ReportCell]]

    def validate(self) -> None:
        for scope, rows in self.cells.items():
            greedy_counts = set()
            for gens, cell in rows.items():
                if cell.candidates_total != (gens + 1) * cell.samples:
                    raise ValueError(
                        f"{scope.value} gens={gens}: winners denominator "
                        f"{cell.candidates_total} != (gens+1)*samples"
                    )
                for name in ("greedy_count", "nft_count", "ft_count"):
                    count = getattr(cell, name)
                    if not 0 <= count <= cell.samples:
                        raise ValueError(f"{scope.value} gens={gens}: {name} {count} > samples")
                if not 0 <= cell.winners_count <= cell.candidates_total:
                    raise ValueError(
                        f"{scope.value} gens={gens}: winners_count exceeds candidate total"
                    )
                greedy_counts.add(cell.greedy_count)
            if len(greedy_counts) > 1:
                raise ValueError(
                    f"{scope.value}: greedy count varies across gens ({sorted(greedy_counts)})"
                )

    def to_counts_dict(self) -> dict:
        return {
            scope.value: {
                str(gens): {
                    "greedy": cell.greedy_count,
                    "nft": cell.nft_count,
                    "ft": cell.ft_count,
                    "winners": cell.winners_count,
                    "samples": cell.samples,
                    "candidates_total": cell.candidates_total,
                }
                for gens, cell in sorted(rows.items())
            }
            for scope, rows in self.cells.items()
        }

    @classmethod
    def from_counts_dict(cls, counts: dict) -> "EvaluationReport":
        cells: dict[StepScope, dict[int, ReportCell]] = {}
        for scope_token, rows in counts.items():
            scope = StepScope.parse(scope_token)
            cells[scope] = {
                int(gens): ReportCell(
                    greedy_count=row["greedy"],
                    nft_count=row["nft"],
                    ft_count=row["ft"],
                    winners_count=row["winners"],
                    samples=row["samples"],
                    candidates_total=row["candidates_total"],
                )
                for gens, row in rows.items()
            }
        report = cls(cells)
        report.validate()
        return report


def build_report(
    records: list[RunRecord],
    scopes: list[StepScope],
    gens_sweep: list[int],
    nft_role: str = "nft",
    ft_role: str = "ft",
) -> EvaluationReport:
    """Aggregate run records into the per-scope, per-gens count table."""
    cells: dict[StepScope, dict[int, ReportCell]] = {}
    for scope in scopes:
        rows: dict[int, ReportCell] = {}
        for gens in gens_sweep:
            greedy, samples = strategy_accuracy(records, scope, gens, GREEDY_STRATEGY)
            nft, _ = strategy_accuracy(records, scope, gens, nft_role)
            ft, _ = strategy_accuracy(records, scope, gens, ft_role)
            winners, total = winners_pct(records, scope, gens)
            rows[gens] = ReportCell(
                greedy_count=greedy,
                nft_count=nft,
                ft_count=ft,
                winners_count=winners,
                samples=samples,
                candidates_total=total,
            )
        cells[scope] = rows
    report = EvaluationReport(cells)
    report.validate()
    return report


def _scope_order(scope: StepScope) -> int:
    return list(StepScope).index(scope)


def render_report(report: EvaluationReport) -> str:
    """One fixed-width block per scope, rows in ascending gens order."""
    if not report.cells or any(not rows for rows in report.cells.values()):
        raise IncompleteReportError("report has no rows for at least one scope")
    blocks = []
    for scope in sorted(report.cells, key=_scope_order):
        rows = report.cells[scope]
        table = [list(_HEADER)]
        for gens in sorted(rows):
            cell = rows[gens]
            table.append(
                [
                    str(gens),
                    str(cell.greedy_count),
                    format_pct(cell.greedy_count, cell.samples),
                    str(cell.nft_count),
                    format_pct(cell.nft_count, cell.samples),
                    str(cell.ft_count),
                    format_pct(cell.ft_count, cell.samples),
                    str(cell.winners_count),
                    format_pct(cell.winners_count, cell.candidates_total),
                ]
            )
        widths = [max(len(row[col]) for row in table) for col in range(len(_HEADER))]
        lines = [_SCOPE_LABELS[scope]]
        for row in table:
            lines.append("  ".join(value.ljust(width) for value, width in zip(row, widths)).rstrip())
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
