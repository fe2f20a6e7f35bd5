"""Box-plot statistics of height estimates per obstacle group."""
import csv
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np

WHISKER_IQR = 1.5


@dataclass(frozen=True)
class BoxStats:
    group: str
    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float
    whisker_low: float
    whisker_high: float
    outliers: int

    def to_dict(self):
        return asdict(self)


def box_stats(group: str, values: Sequence[float]) -> BoxStats:
    """Quartiles with whiskers at the most extreme values within 1.5 IQR."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    if len(values) == 0:
        raise ValueError(f"group {group!r} has no values")
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    inside = values[
        (values >= q1 - WHISKER_IQR * iqr) & (values <= q3 + WHISKER_IQR * iqr)
    ]
    return BoxStats(
        group=group,
        n=len(values),
        minimum=float(values[0]),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        maximum=float(values[-1]),
        mean=float(values.mean()),
        whisker_low=float(inside[0]),
        whisker_high=float(inside[-1]),
        outliers=int(len(values) - len(inside)),
    )


def group_box_stats(groups: Dict[str, Sequence[float]]) -> List[BoxStats]:
    return [box_stats(g, v) for g, v in sorted(groups.items()) if len(v)]


def write_boxplot_csv(path: str, stats: Sequence[BoxStats]):
    fields = list(BoxStats.__dataclass_fields__)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for s in stats:
            writer.writerow(s.to_dict())
