"""Recording/track domain types and construction of analysis-ready panels.

A :class:`PanelDataset` is stored column-wise in a :class:`pandas.DataFrame`
whose columns follow the CSV layout ``CSV_COLUMNS``. Outcomes are kept in
levels (e.g. monthly sales); estimators apply :func:`log1_outcome`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Iterator, Literal, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import InputError, PanelFormatError

CSV_COLUMNS = (
    "unit_id",
    "period",
    "outcome",
    "treated",
    "post",
    "age_years",
    "cluster_id",
    "popular_unit",
    "popular_artist",
    "dose_decile",
)
REQUIRED_COLUMNS = CSV_COLUMNS[:5]


class TreatmentStatus(enum.Enum):
    TREATED = "treated"
    CONTROL = "control"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class Track:
    track_id: str
    isrc: str
    duration_s: float
    release_date: date
    preview_len_pre_s: Optional[float] = None
    preview_len_post_s: Optional[float] = None

    def __post_init__(self):
        if not self.duration_s > 0:
            raise InputError(f"track {self.track_id}: duration must be positive")
        for name in ("preview_len_pre_s", "preview_len_post_s"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= self.duration_s:
                raise InputError(f"track {self.track_id}: {name}={value} outside [0, duration]")


def lower_median(values: Sequence[float]) -> float:
    """Median that always returns a member of ``values`` (lower middle for even counts)."""
    if not values:
        raise InputError("median of an empty sequence")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class Recording:
    isrc: str
    tracks: tuple[Track, ...]
    first_release_year: int
    sales_2009: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        if not self.tracks:
            raise InputError(f"recording {self.isrc} has no tracks")
        if self.sales_2009 < 0:
            raise InputError(f"recording {self.isrc}: negative 2009 sales")

    @property
    def duration_s(self) -> float:
        return lower_median([t.duration_s for t in self.tracks])


def link_representative_track(recording: Recording) -> Track:
    """Pick the track standing in for ``recording``.

    The chosen track has the median duration; ties go to the earliest
    release date, then the smallest track id.
    """
    median = recording.duration_s
    candidates = [t for t in recording.tracks if t.duration_s == median]
    return min(candidates, key=lambda t: (t.release_date, t.track_id))


def screen_duration_range(recording: Recording, max_range_s: float = 5.0) -> bool:
    """True if the track durations span less than ``max_range_s`` seconds."""
    durations = [t.duration_s for t in recording.tracks]
    return (max(durations) - min(durations)) < max_range_s


def assign_treatment(recording: Recording) -> TreatmentStatus:
    for t in recording.tracks:
        if t.preview_len_pre_s is None or t.preview_len_post_s is None:
            raise InputError(f"track {t.track_id} is missing a preview length")
    if all(t.preview_len_post_s == t.preview_len_pre_s for t in recording.tracks):
        return TreatmentStatus.CONTROL
    if all(t.preview_len_post_s > t.preview_len_pre_s for t in recording.tracks):
        return TreatmentStatus.TREATED
    return TreatmentStatus.AMBIGUOUS


def select_artist_title_representative(
    recordings: Sequence[Recording], jan2010_sales: Mapping[str, int]
) -> Recording:
    """Recording with the most January 2010 sales among those sharing an artist-title.

    Ties: earliest first release year, then smallest ISRC.
    """
    if not recordings:
        raise InputError("no recordings to choose from")
    return min(
        recordings,
        key=lambda r: (-jan2010_sales.get(r.isrc, 0), r.first_release_year, r.isrc),
    )


def log1_outcome(y):
    """``log(y + 1)``; accepts scalars or arrays."""
    arr = np.asarray(y, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise InputError("log1_outcome needs nonnegative outcomes")
    out = np.log1p(arr)
    return float(out) if out.ndim == 0 else out


def median_popularity(values: Mapping[str, float]) -> dict[str, int]:
    """Flag keys whose value is greater than or equal to the median of all values."""
    if not values:
        return {}
    median = float(np.median(np.fromiter(values.values(), dtype=np.float64)))
    return {k: int(v >= median) for k, v in values.items()}


@dataclass(frozen=True)
class PanelObservation:
    unit_id: str
    period: int
    outcome: float
    treated: int
    post: int
    age_years: int = 0
    cluster_id: str = ""
    popular_unit: int = 0
    popular_artist: int = 0
    dose_decile: Optional[int] = None


@dataclass
class PanelDataset:
    """Long-format unit-by-period panel.

    ``frame`` holds one row per observation with the ``CSV_COLUMNS`` columns,
    sorted by unit then period.
    """

    frame: pd.DataFrame
    policy_period: int
    balanced: bool = True
    periods: list[int] = field(init=False)

    def __post_init__(self):
        self.frame = _normalize_frame(self.frame)
        self.periods = sorted(int(p) for p in self.frame["period"].unique())
        self.validate()

    # construction -----------------------------------------------------

    @classmethod
    def from_observations(
        cls, observations: Iterable[PanelObservation], policy_period: int, allow_unbalanced: bool = False
    ) -> "PanelDataset":
        rows = [_obs_dict(o) for o in observations]
        frame = pd.DataFrame(rows, columns=list(CSV_COLUMNS))
        return cls(frame, policy_period, balanced=not allow_unbalanced)

    @classmethod
    def read_csv(cls, path, policy_period: int, allow_unbalanced: bool = False) -> "PanelDataset":
        try:
            frame = pd.read_csv(path, dtype={"unit_id": str, "cluster_id": str})
        except pd.errors.EmptyDataError as exc:
            raise PanelFormatError(f"{path}: empty file") from exc
        missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
        if missing:
            raise PanelFormatError(f"{path}: missing column(s) {', '.join(missing)}")
        return cls(frame, policy_period, balanced=not allow_unbalanced)

    def to_csv(self, path_or_buf=None):
        out = self.frame.copy()
        out["dose_decile"] = out["dose_decile"].astype("Int64")
        return out.to_csv(path_or_buf, index=False, float_format="%.17g")

    # invariants -------------------------------------------------------

    def validate(self) -> None:
        f = self.frame
        if f.empty:
            return
        if f.duplicated(["unit_id", "period"]).any():
            dup = f.loc[f.duplicated(["unit_id", "period"]), ["unit_id", "period"]].iloc[0]
            raise PanelFormatError(f"duplicate observation for unit {dup.unit_id} in period {dup.period}")
        if (f["outcome"] < 0).any() or f["outcome"].isna().any():
            raise PanelFormatError("outcome must be nonnegative and present")
        for col in ("treated", "post", "popular_unit", "popular_artist"):
            if not f[col].isin([0, 1]).all():
                raise PanelFormatError(f"column {col} must be 0/1")
        if f.groupby("period")["post"].nunique().max() > 1:
            raise PanelFormatError("post must be a function of period only")
        if f.groupby("unit_id")["treated"].nunique().max() > 1:
            raise PanelFormatError("treated must be constant within a unit")
        dose = f["dose_decile"].dropna()
        if not dose.between(1, 10).all():
            raise PanelFormatError("dose_decile must lie in 1..10")
        if self.policy_period not in self.periods:
            raise PanelFormatError(f"policy period {self.policy_period} not among panel periods")
        if self.balanced:
            counts = f.groupby("unit_id")["period"].nunique()
            short = counts[counts < len(self.periods)]
            if len(short):
                raise PanelFormatError(
                    f"unbalanced panel: unit {short.index[0]} misses periods (use allow_unbalanced)"
                )

    # views ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def observations(self) -> Iterator[PanelObservation]:
        for row in self.frame.itertuples(index=False):
            d = row._asdict()
            dose = d["dose_decile"]
            d["dose_decile"] = None if pd.isna(dose) else int(dose)
            yield PanelObservation(**d)

    @property
    def units(self) -> list[str]:
        return list(pd.unique(self.frame["unit_id"]))

    def subset(self, mask) -> "PanelDataset":
        return PanelDataset(self.frame.loc[np.asarray(mask, dtype=bool)], self.policy_period, self.balanced)

    def log_outcome(self) -> np.ndarray:
        return log1_outcome(self.frame["outcome"].to_numpy(dtype=np.float64))


def _obs_dict(o: PanelObservation) -> dict:
    return {name: getattr(o, name) for name in CSV_COLUMNS}


def _normalize_frame(frame: pd.DataFrame) -> pd.DataFrame:
    f = frame.copy()
    for col in CSV_COLUMNS:
        if col not in f.columns:
            f[col] = np.nan if col == "dose_decile" else (f["unit_id"] if col == "cluster_id" else 0)
    f = f[list(CSV_COLUMNS)]
    f["unit_id"] = f["unit_id"].astype(str)
    f["cluster_id"] = f["cluster_id"].where(f["cluster_id"].notna() & (f["cluster_id"] != ""), f["unit_id"])
    f["cluster_id"] = f["cluster_id"].astype(str)
    for col in ("period", "treated", "post", "age_years", "popular_unit", "popular_artist"):
        if f[col].isna().any():
            raise PanelFormatError(f"column {col} has missing values")
        f[col] = f[col].astype(np.int64)
    f["outcome"] = f["outcome"].astype(np.float64)
    f["dose_decile"] = pd.to_numeric(f["dose_decile"], errors="coerce").astype(np.float64)
    return f.sort_values(["unit_id", "period"], kind="mergesort").reset_index(drop=True)


def split_by_popularity(
    ds: PanelDataset, flag: Literal["unit", "artist"] = "unit"
) -> tuple[PanelDataset, PanelDataset]:
    """Split into ``(unpopular, popular)`` subsamples using the stored 0/1 flags."""
    column = {"unit": "popular_unit", "artist": "popular_artist"}.get(flag)
    if column is None:
        raise InputError(f"unknown popularity flag {flag!r}")
    popular = ds.frame[column].to_numpy() == 1
    return ds.subset(~popular), ds.subset(popular)
