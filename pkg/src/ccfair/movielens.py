"""MovieLens ingestion: corpus selection, binarization, snapshots, quality.

The pipeline turns raw ratings into simulator starting states:

1. pick the n most-rated movies of one genre and a seeded user sample
   whose size divides evenly into the n(n-1) pairwise groups;
2. binarize ratings against each user's corpus-local mean (strictly
   above the mean is a positive);
3. cut timestamp-ordered prefixes of the positives ("snapshots") and
   map movies to quality ranks from the IMDb weighted rating;
4. write snapshots to small CSV files with a JSON provenance header,
   loadable into a PlatformState.

Internal user ids are 1..m (original ids ascending); creator ranks are
the IMDb quality ranks 1..n.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .errors import InputDataError, ParseError
from .model import PlatformState, QualityRanking, _bulk_follow, new_platform

SNAPSHOT_MAGIC = "#ccfair-snapshot"


@dataclass(frozen=True)
class InteractionLog:
    """Parsed ratings joined to movie metadata.

    ``ratings`` columns: user, movie, rating, timestamp (one row per
    (user, movie) pair). ``movies`` columns: movie, title, genres
    (pipe-separated string), imdb_id (tconst).
    """

    ratings: pd.DataFrame
    movies: pd.DataFrame


@dataclass(frozen=True)
class Corpus:
    """Selected movies (with quality ranks) and the sampled user set.

    ``movies`` is indexed 0..n-1 in rank order (row r = rank r+1) with
    columns movie, imdb_id, rating_count, imdb_rating, imdb_votes, wr.
    ``users`` holds the original user ids ascending; position u-1 is
    internal user u.
    """

    movies: pd.DataFrame
    users: np.ndarray
    genre: str
    seed: int

    @property
    def n(self) -> int:
        return len(self.movies)

    @property
    def m(self) -> int:
        return len(self.users)

    @property
    def ranking(self) -> QualityRanking:
        return QualityRanking(tuple(self.movies["movie"].tolist()))


@dataclass(frozen=True)
class InteractionSnapshot:
    """Prefix of the positive interactions as (user, rank) pairs."""

    n: int
    m: int
    ratio: float
    users: np.ndarray
    ranks: np.ndarray

    @property
    def count(self) -> int:
        return int(self.users.shape[0])

    def to_mapping(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for u, r in zip(self.users.tolist(), self.ranks.tolist()):
            out.setdefault(u, set()).add(r)
        return out


def _read_csv(path, **kwargs) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"missing input file: {path}")
    try:
        return pd.read_csv(path, dtype=str, skipinitialspace=True, **kwargs)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()


def _require_columns(df: pd.DataFrame, cols, path):
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise ParseError(f"{path}: missing column(s) {', '.join(missing)}")


def _numeric(df: pd.DataFrame, col: str, path, integer=False, lo=None, hi=None):
    """Parse one string column, reporting the first offending line (1-based,
    header is line 1)."""
    vals = pd.to_numeric(df[col], errors="coerce")
    bad = vals.isna()
    if integer:
        bad |= ~bad & (vals % 1 != 0)
    if lo is not None:
        bad |= ~bad & (vals < lo)
    if hi is not None:
        bad |= ~bad & (vals > hi)
    if bad.any():
        pos = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(
            f"{path}, line {pos + 2}: bad {col} value {df[col].iloc[pos]!r}"
        )
    return vals.astype(np.int64 if integer else np.float64)


def load_ratings(ratings_path, movies_path, links_path) -> InteractionLog:
    """Parse MovieLens ratings/movies/links files.

    Movies without an IMDb link are dropped (with a warning), as are
    their ratings. Duplicate (user, movie) ratings keep the latest.
    """
    ratings = _read_csv(ratings_path)
    movies = _read_csv(movies_path)
    links = _read_csv(links_path)

    if ratings.empty:
        warnings.warn(f"{ratings_path}: no rating rows", stacklevel=2)
        ratings = pd.DataFrame(columns=["userId", "movieId", "rating", "timestamp"])
    _require_columns(ratings, ["userId", "movieId", "rating", "timestamp"], ratings_path)
    _require_columns(movies, ["movieId", "title", "genres"], movies_path)
    _require_columns(links, ["movieId", "imdbId"], links_path)

    parsed = pd.DataFrame(
        {
            "user": _numeric(ratings, "userId", ratings_path, integer=True, lo=1),
            "movie": _numeric(ratings, "movieId", ratings_path, integer=True, lo=1),
            "rating": _numeric(ratings, "rating", ratings_path, lo=0.5, hi=5.0),
            "timestamp": _numeric(ratings, "timestamp", ratings_path, integer=True, lo=0),
        }
    )
    dupes = parsed.duplicated(subset=["user", "movie"], keep=False)
    if dupes.any():
        warnings.warn(
            f"{ratings_path}: {int(dupes.sum())} duplicate (user, movie) rows; "
            "keeping the latest by timestamp",
            stacklevel=2,
        )
        parsed = (
            parsed.sort_values(["user", "movie", "timestamp"], kind="stable")
            .drop_duplicates(subset=["user", "movie"], keep="last")
            .reset_index(drop=True)
        )

    meta = pd.DataFrame(
        {
            "movie": _numeric(movies, "movieId", movies_path, integer=True, lo=1),
            "title": movies["title"].fillna(""),
            "genres": movies["genres"].fillna(""),
        }
    )
    link_ids = pd.DataFrame(
        {
            "movie": _numeric(links, "movieId", links_path, integer=True, lo=1),
            "imdb_id": "tt" + links["imdbId"].str.strip().str.zfill(7),
        }
    )
    link_ids = link_ids[links["imdbId"].str.strip().str.isdigit().fillna(False)]
    meta = meta.merge(link_ids, on="movie", how="left")
    unlinked = meta["imdb_id"].isna()
    if unlinked.any():
        warnings.warn(
            f"{int(unlinked.sum())} movie(s) without an IMDb link dropped",
            stacklevel=2,
        )
        meta = meta[~unlinked].reset_index(drop=True)
    parsed = parsed[parsed["movie"].isin(meta["movie"])].reset_index(drop=True)
    return InteractionLog(ratings=parsed, movies=meta)


def load_imdb_ratings(path) -> pd.DataFrame:
    """Parse an IMDb title.ratings table (TSV: tconst, averageRating, numVotes)."""
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"missing input file: {path}")
    df = pd.read_csv(path, sep="\t", dtype=str)
    _require_columns(df, ["tconst", "averageRating", "numVotes"], path)
    return pd.DataFrame(
        {
            "imdb_id": df["tconst"],
            "imdb_rating": _numeric(df, "averageRating", path, lo=0.0, hi=10.0),
            "imdb_votes": _numeric(df, "numVotes", path, integer=True, lo=0),
        }
    )


def imdb_weighted_rating(
    rating: np.ndarray,
    votes: np.ndarray,
    m_votes: float,
    mean_rating: float,
) -> np.ndarray:
    """Bayesian-shrunk score WR = v/(v+m) * R + m/(v+m) * C."""
    rating = np.asarray(rating, dtype=np.float64)
    votes = np.asarray(votes, dtype=np.float64)
    denom = votes + m_votes
    with np.errstate(invalid="ignore", divide="ignore"):
        wr = np.where(
            denom > 0,
            votes / denom * rating + m_votes / denom * mean_rating,
            mean_rating,
        )
    return wr


def quality_from_imdb(
    movies: pd.DataFrame,
    m_votes: Optional[float] = None,
    mean_rating: Optional[float] = None,
) -> pd.DataFrame:
    """Order corpus movies by IMDb weighted rating.

    ``movies`` needs columns movie, imdb_id, imdb_rating, imdb_votes; a
    NaN rating or vote count means the IMDb entry was missing. Defaults:
    m_votes is the 25th percentile of corpus vote counts, mean_rating
    the corpus mean. Ties resolve by more votes, then imdb_id ascending.
    Returns the frame sorted by rank with a ``wr`` column.
    """
    missing = movies["imdb_rating"].isna() | movies["imdb_votes"].isna()
    if missing.any():
        offenders = ", ".join(str(x) for x in movies.loc[missing, "movie"].tolist())
        raise InputDataError(f"no IMDb rating for corpus movie(s): {offenders}")
    votes = movies["imdb_votes"].to_numpy(dtype=np.float64)
    rating = movies["imdb_rating"].to_numpy(dtype=np.float64)
    if m_votes is None:
        m_votes = float(np.percentile(votes, 25))
    if mean_rating is None:
        mean_rating = float(rating.mean())
    out = movies.copy()
    out["wr"] = imdb_weighted_rating(rating, votes, m_votes, mean_rating)
    out = out.sort_values(
        ["wr", "imdb_votes", "imdb_id"],
        ascending=[False, False, True],
        kind="stable",
    ).reset_index(drop=True)
    return out


def select_corpus(
    log: InteractionLog,
    imdb: pd.DataFrame,
    genre: str = "Film-Noir",
    n: int = 100,
    target_users: int = 49500,
    seed: int = 0,
    m_votes: Optional[float] = None,
    mean_rating: Optional[float] = None,
) -> Corpus:
    """Pick the n most-rated movies of a genre and a pairwise-ready user set.

    Users who rated at least one corpus movie are down-sampled (seeded,
    uniform) to the largest count <= target_users divisible by n(n-1),
    so the pairwise schedule's equal-group mode always applies.
    """
    has_genre = log.movies["genres"].str.split("|").apply(lambda g: genre in g)
    if not has_genre.any():
        raise InputDataError(f"genre {genre!r} not present in the movie metadata")
    genre_movies = log.movies.loc[has_genre, ["movie", "imdb_id"]]
    counts = (
        log.ratings[log.ratings["movie"].isin(genre_movies["movie"])]
        .groupby("movie")
        .size()
        .rename("rating_count")
    )
    ranked = genre_movies.merge(counts, on="movie", how="left")
    ranked["rating_count"] = ranked["rating_count"].fillna(0).astype(np.int64)
    ranked = ranked.sort_values(
        ["rating_count", "movie"], ascending=[False, True], kind="stable"
    )
    if len(ranked) < n:
        raise InputDataError(
            f"only {len(ranked)} {genre!r} movies available, need n={n}"
        )
    top = ranked.head(n).reset_index(drop=True)

    top = top.merge(imdb, on="imdb_id", how="left")
    top = quality_from_imdb(top, m_votes=m_votes, mean_rating=mean_rating)

    raters = np.unique(
        log.ratings.loc[log.ratings["movie"].isin(top["movie"]), "user"].to_numpy()
    )
    groups = n * (n - 1)
    avail = min(len(raters), target_users)
    keep = avail - avail % groups
    if keep == 0:
        raise InputDataError(
            f"{len(raters)} users rated the corpus; need at least n(n-1) = {groups}"
        )
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(raters, size=keep, replace=False))
    return Corpus(movies=top, users=chosen, genre=genre, seed=seed)


def binarize(log: InteractionLog, corpus: Corpus) -> pd.DataFrame:
    """Positive interactions: rating strictly above the user's corpus mean.

    Returns columns user (internal 1..m), movie, rank, timestamp, one
    row per positive, unordered.
    """
    rank_of = pd.Series(
        np.arange(1, corpus.n + 1, dtype=np.int64),
        index=corpus.movies["movie"].to_numpy(),
    )
    user_of = pd.Series(
        np.arange(1, corpus.m + 1, dtype=np.int64), index=corpus.users
    )
    sub = log.ratings[
        log.ratings["movie"].isin(rank_of.index)
        & log.ratings["user"].isin(user_of.index)
    ].copy()
    mean = sub.groupby("user")["rating"].transform("mean")
    pos = sub[sub["rating"] > mean]
    return pd.DataFrame(
        {
            "user": user_of.loc[pos["user"]].to_numpy(),
            "movie": pos["movie"].to_numpy(),
            "rank": rank_of.loc[pos["movie"]].to_numpy(),
            "timestamp": pos["timestamp"].to_numpy(),
        }
    )


def snapshot(positives: pd.DataFrame, ratio: float, n: int, m: int) -> InteractionSnapshot:
    """First floor(ratio * P) positives in (timestamp, user, movie) order."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    ordered = positives.sort_values(
        ["timestamp", "user", "movie"], kind="stable"
    ).reset_index(drop=True)
    keep = int(len(ordered) * ratio)
    head = ordered.head(keep)
    return InteractionSnapshot(
        n=n,
        m=m,
        ratio=ratio,
        users=head["user"].to_numpy(dtype=np.int64),
        ranks=head["rank"].to_numpy(dtype=np.int32),
    )


def init_state_from_snapshot(snap: InteractionSnapshot) -> PlatformState:
    """PlatformState at t=0 whose followed sets are the snapshot pairs."""
    state = new_platform(snap.n, snap.m)
    if snap.count:
        if snap.users.min() < 1 or snap.users.max() > snap.m:
            raise InputDataError("snapshot user id out of range")
        if snap.ranks.min() < 1 or snap.ranks.max() > snap.n:
            raise InputDataError("snapshot rank out of range")
        _bulk_follow(state, snap.users - 1, (snap.ranks - 1).astype(np.int64))
    return state


def write_snapshot(path, snap: InteractionSnapshot, provenance: Optional[dict] = None):
    """CSV with a one-line JSON provenance header, then user,rank rows."""
    header = {"n": snap.n, "m": snap.m, "ratio": snap.ratio}
    if provenance:
        header.update(provenance)
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{SNAPSHOT_MAGIC} {json.dumps(header, sort_keys=True)}\n")
        fh.write("user,rank\n")
        for u, r in zip(snap.users.tolist(), snap.ranks.tolist()):
            fh.write(f"{u},{r}\n")


def load_snapshot(path) -> tuple[InteractionSnapshot, dict]:
    """Read a snapshot file back; returns (snapshot, provenance header)."""
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"missing snapshot file: {path}")
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith(SNAPSHOT_MAGIC + " "):
            raise ParseError(f"{path}, line 1: not a snapshot file (missing header)")
        try:
            header = json.loads(first[len(SNAPSHOT_MAGIC) + 1 :])
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}, line 1: bad provenance JSON ({exc})") from exc
        for key in ("n", "m", "ratio"):
            if key not in header:
                raise ParseError(f"{path}, line 1: header missing {key!r}")
        columns = fh.readline().rstrip("\n")
        if columns != "user,rank":
            raise ParseError(f"{path}, line 2: expected 'user,rank', got {columns!r}")
        users = []
        ranks = []
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                u, r = int(parts[0]), int(parts[1])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}, line {lineno}: bad row {line!r}") from exc
            users.append(u)
            ranks.append(r)
    snap = InteractionSnapshot(
        n=int(header["n"]),
        m=int(header["m"]),
        ratio=float(header["ratio"]),
        users=np.asarray(users, dtype=np.int64),
        ranks=np.asarray(ranks, dtype=np.int32),
    )
    if snap.count:
        if snap.users.min() < 1 or snap.users.max() > snap.m:
            raise InputDataError(f"{path}: snapshot user id out of range 1..{snap.m}")
        if snap.ranks.min() < 1 or snap.ranks.max() > snap.n:
            raise InputDataError(f"{path}: snapshot rank out of range 1..{snap.n}")
    return snap, header


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def prep_pipeline(
    ratings_path,
    movies_path,
    links_path,
    imdb_path,
    outdir,
    genre: str = "Film-Noir",
    n: int = 100,
    target_users: int = 49500,
    ratios: tuple = (0.0, 0.02, 0.0532, 0.0892, 0.12),
    seed: int = 0,
) -> dict:
    """Run the whole pipeline and write snapshots + a manifest to outdir.

    The manifest records input hashes, parameters, the quality ranking,
    and whether the full-history popularity order already agrees with
    the quality order (it should not, on real data; a warning is issued
    if it does, since aligned popularity makes the starting states
    uninformative).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    log = load_ratings(ratings_path, movies_path, links_path)
    imdb = load_imdb_ratings(imdb_path)
    corpus = select_corpus(
        log, imdb, genre=genre, n=n, target_users=target_users, seed=seed
    )
    positives = binarize(log, corpus)

    full = snapshot(positives, 1.0, corpus.n, corpus.m)
    counts = np.bincount(full.ranks - 1, minlength=corpus.n)
    aligned = bool(np.all(np.diff(counts) <= 0))
    if aligned:
        warnings.warn(
            "full-history popularity order already matches the quality "
            "ranking; snapshot starts will not be informative",
            stacklevel=2,
        )

    inputs = {
        "ratings": {"path": str(ratings_path), "sha256": _sha256(ratings_path)},
        "movies": {"path": str(movies_path), "sha256": _sha256(movies_path)},
        "links": {"path": str(links_path), "sha256": _sha256(links_path)},
        "imdb": {"path": str(imdb_path), "sha256": _sha256(imdb_path)},
    }
    snapshots = {}
    for ratio in ratios:
        snap = snapshot(positives, float(ratio), corpus.n, corpus.m)
        name = f"snapshot-{ratio:.6g}.csv"
        write_snapshot(
            outdir / name,
            snap,
            provenance={"genre": genre, "seed": seed, "inputs": inputs},
        )
        snapshots[f"{ratio:.6g}"] = name

    manifest = {
        "genre": genre,
        "n": corpus.n,
        "m": corpus.m,
        "seed": seed,
        "target_users": target_users,
        "inputs": inputs,
        "ranking": [
            {
                "rank": i + 1,
                "movie": int(row["movie"]),
                "imdb_id": row["imdb_id"],
                "wr": float(row["wr"]),
                "rating_count": int(row["rating_count"]),
            }
            for i, row in corpus.movies.iterrows()
        ],
        "total_positives": int(len(positives)),
        "full_history_followers": counts.tolist(),
        "popularity_quality_aligned": aligned,
        "snapshots": snapshots,
    }
    with (outdir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
