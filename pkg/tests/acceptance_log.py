"""Per-item outcomes of the acceptance suite, rolled up to one line per criterion."""

from __future__ import annotations

from collections import defaultdict

RESULTS: dict[str, list[tuple[str, bool, str]]] = defaultdict(list)


def record(criterion: str, item: str, ok: bool, detail: str = "") -> bool:
    RESULTS[criterion].append((item, ok, detail))
    print(f"{'PASS' if ok else 'FAIL'} {criterion} {item} {detail}".rstrip())
    return ok


def summary_lines() -> list[str]:
    lines = []
    for crit in sorted(RESULTS, key=lambda c: int(c[1:])):
        items = RESULTS[crit]
        failed = [f"{name} ({detail})" if detail else name for name, ok, detail in items if not ok]
        if failed:
            lines.append(f"FAIL {crit}: {len(failed)}/{len(items)} item(s) failed: " + "; ".join(failed))
        else:
            lines.append(f"PASS {crit}: {len(items)} item(s)")
    return lines
