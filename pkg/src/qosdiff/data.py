"""Dataset ingestion, normalization, splitting and test-set corruption.

Two ingestion paths are supported: the WS-DREAM matrix format (dense
whitespace-separated matrix with -1 for missing, plus tab-separated entity
list files carrying context attributes) and a generic CSV triplet format
``user_id,service_id,value,<attribute...>`` for large triplet corpora.

Only strictly positive observed values enter the training pool; the -1 /
zero encodings in raw matrices are storage conventions, never supervision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_USER_FIELDS = ("Country", "AS")
DEFAULT_SERVICE_FIELDS = ("Country", "AS", "Provider")


@dataclass
class QoSDataset:
    """Sparse observed (user, service, value) triplets plus context indices.

    Context index 0 is reserved per field for unseen attribute values;
    vocabulary sizes therefore count the reserved slot.
    """

    m: int
    n: int
    users: np.ndarray       # int64, triplet user indices
    services: np.ndarray    # int64, triplet service indices
    values: np.ndarray      # float64, strictly positive
    global_max: float
    user_context: np.ndarray       # m x p int64
    service_context: np.ndarray    # n x q int64
    user_vocab_sizes: list[int] = field(default_factory=list)
    service_vocab_sizes: list[int] = field(default_factory=list)
    user_field_names: list[str] = field(default_factory=list)
    service_field_names: list[str] = field(default_factory=list)
    normalized: bool = False

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.services = np.asarray(self.services, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.users) and (self.users.min() < 0 or self.users.max() >= self.m):
            raise ValueError("user index out of range")
        if len(self.services) and (
            self.services.min() < 0 or self.services.max() >= self.n
        ):
            raise ValueError("service index out of range")
        if len(self.values) and self.values.min() <= 0:
            raise ValueError("observed QoS values must be strictly positive")

    @property
    def num_observed(self):
        return len(self.values)

    @property
    def p(self):
        return self.user_context.shape[1]

    @property
    def q(self):
        return self.service_context.shape[1]


@dataclass
class Split:
    """Disjoint train/validation/test index lists into the triplet arrays."""

    density: float
    seed: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass
class CorruptedTestSet:
    """Test triplets with a fraction of (user, service) identities resampled."""

    noise_ratio: float
    perturbed_indices: np.ndarray  # positions within the test arrays
    users: np.ndarray
    services: np.ndarray
    values: np.ndarray


# ----------------------------------------------------------------------
# vocabulary helpers
# ----------------------------------------------------------------------
def _build_vocab(columns):
    """First-appearance vocabularies; index 0 reserved for unseen values."""
    n_fields = len(columns[0]) if columns else 0
    vocabs = [dict() for _ in range(n_fields)]
    indices = np.zeros((len(columns), n_fields), dtype=np.int64)
    for row, vals in enumerate(columns):
        for k, v in enumerate(vals):
            if v not in vocabs[k]:
                vocabs[k][v] = len(vocabs[k]) + 1
            indices[row, k] = vocabs[k][v]
    sizes = [len(v) + 1 for v in vocabs]
    return indices, sizes


def _match_field(name, headers):
    """Resolve a requested attribute name against file header columns."""
    lowered = [h.lower() for h in headers]
    want = name.lower()
    if want in lowered:
        return lowered.index(want)
    hits = [i for i, h in enumerate(lowered) if want in h]
    if len(hits) == 1:
        return hits[0]
    raise ValueError(
        f"unknown attribute {name!r}; available columns: {headers}"
    )


def _read_entity_list(path, fields):
    with open(path, encoding="utf-8", errors="replace") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    headers = [h.strip().strip("[]").strip() for h in lines[0].split("\t")]
    cols = [_match_field(name, headers) for name in fields]
    rows = []
    for ln in lines[1:]:
        parts = ln.split("\t")
        rows.append(tuple(parts[c].strip() if c < len(parts) else "" for c in cols))
    return rows


# ----------------------------------------------------------------------
# loaders
# ----------------------------------------------------------------------
def load_wsdream(matrix_path, user_list_path, service_list_path,
                 user_fields=DEFAULT_USER_FIELDS,
                 service_fields=DEFAULT_SERVICE_FIELDS):
    """Load a WS-DREAM style dense matrix plus entity list files.

    Matrix entries encoded as -1 (or any non-positive value) are treated
    as unobserved. Context vocabularies are built by first-appearance
    ordering over the selected attribute columns.
    """
    rows = []
    width = None
    with open(matrix_path) as f:
        for lineno, ln in enumerate(f, start=1):
            if not ln.strip():
                continue
            vals = np.array(ln.split(), dtype=np.float64)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(
                    f"row {lineno}: expected {width} values, got {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise ValueError(f"no matrix rows found in {matrix_path}")
    matrix = np.vstack(rows)
    m, n = matrix.shape

    ui, si = np.nonzero(matrix > 0)
    values = matrix[ui, si]

    user_rows = _read_entity_list(user_list_path, user_fields)
    service_rows = _read_entity_list(service_list_path, service_fields)
    if len(user_rows) < m or len(service_rows) < n:
        raise ValueError(
            f"entity lists too short: {len(user_rows)} users / "
            f"{len(service_rows)} services for a {m}x{n} matrix"
        )
    user_context, user_vocab = _build_vocab(user_rows[:m])
    service_context, service_vocab = _build_vocab(service_rows[:n])

    return QoSDataset(
        m=m, n=n, users=ui, services=si, values=values,
        global_max=float(values.max()),
        user_context=user_context, service_context=service_context,
        user_vocab_sizes=user_vocab, service_vocab_sizes=service_vocab,
        user_field_names=list(user_fields),
        service_field_names=list(service_fields),
    )


def load_triplets_csv(path, user_fields=(), service_fields=()):
    """Load a generic ``user_id,service_id,value,<attribute...>`` CSV.

    Entity IDs are densely re-indexed in first-appearance order. Rows with
    non-positive or non-numeric values are rejected (count logged);
    duplicate (user, service) pairs keep the last occurrence.
    """
    import csv

    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"no observations in {path}") from None
        header = [h.strip() for h in header]
        attr_names = header[3:]
        user_cols = [3 + _match_field(name, attr_names) for name in user_fields]
        service_cols = [3 + _match_field(name, attr_names) for name in service_fields]

        user_index, service_index = {}, {}
        user_attrs, service_attrs = [], []
        entries = {}
        rejected = 0
        duplicates = 0
        for row in reader:
            if not row:
                continue
            try:
                value = float(row[2])
            except (ValueError, IndexError):
                rejected += 1
                continue
            if value <= 0 or not np.isfinite(value):
                rejected += 1
                continue
            uid, sid = row[0].strip(), row[1].strip()
            if uid not in user_index:
                user_index[uid] = len(user_index)
                user_attrs.append(tuple(row[c].strip() for c in user_cols))
            if sid not in service_index:
                service_index[sid] = len(service_index)
                service_attrs.append(tuple(row[c].strip() for c in service_cols))
            key = (user_index[uid], service_index[sid])
            if key in entries:
                duplicates += 1
            entries[key] = value  # last occurrence wins

    if not entries:
        raise ValueError(f"no observations in {path}")
    if rejected:
        log.warning("%s: rejected %d rows with invalid values", path, rejected)
    if duplicates:
        log.warning("%s: %d duplicate (user, service) pairs, kept last", path, duplicates)

    m, n = len(user_index), len(service_index)
    pairs = list(entries.items())
    ui = np.array([p[0][0] for p in pairs], dtype=np.int64)
    si = np.array([p[0][1] for p in pairs], dtype=np.int64)
    values = np.array([p[1] for p in pairs], dtype=np.float64)

    if user_fields:
        user_context, user_vocab = _build_vocab(user_attrs)
    else:
        user_context, user_vocab = np.zeros((m, 0), dtype=np.int64), []
    if service_fields:
        service_context, service_vocab = _build_vocab(service_attrs)
    else:
        service_context, service_vocab = np.zeros((n, 0), dtype=np.int64), []

    return QoSDataset(
        m=m, n=n, users=ui, services=si, values=values,
        global_max=float(values.max()),
        user_context=user_context, service_context=service_context,
        user_vocab_sizes=user_vocab, service_vocab_sizes=service_vocab,
        user_field_names=list(user_fields),
        service_field_names=list(service_fields),
    )


# ----------------------------------------------------------------------
# transforms
# ----------------------------------------------------------------------
def normalize(ds):
    """Rescale values into (0, 1] by the global maximum."""
    if ds.normalized:
        return ds
    if ds.global_max <= 0:
        raise ValueError("global maximum must be positive")
    return replace(ds, values=ds.values / ds.global_max, normalized=True)


def denormalize(ds):
    """Inverse of :func:`normalize`."""
    if not ds.normalized:
        return ds
    return replace(ds, values=ds.values * ds.global_max, normalized=False)


def make_split(ds, density, seed):
    """Permute observed entries once, then prefix-partition.

    Train gets ``floor(density * m * n)`` entries, validation
    ``floor(0.05 * m * n)``, test everything else.
    """
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    cells = ds.m * ds.n
    n_train = int(np.floor(density * cells))
    n_val = int(np.floor(0.05 * cells))
    n_obs = ds.num_observed
    if n_train + n_val > n_obs:
        raise ValueError(
            f"insufficient observed entries: need {n_train + n_val} "
            f"(train {n_train} + val {n_val}), have {n_obs}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_obs)
    return Split(
        density=density, seed=seed,
        train=perm[:n_train],
        val=perm[n_train:n_train + n_val],
        test=perm[n_train + n_val:],
    )


def corrupt_test(split, ds, p, seed):
    """Resample identities of ``floor(p/100 * N_test)`` test triplets.

    Values are never touched; replacement indices are uniform over the
    full user and service ranges.
    """
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"noise ratio must lie in [0, 100], got {p}")
    test = split.test
    users = ds.users[test].copy()
    services = ds.services[test].copy()
    values = ds.values[test].copy()
    n_perturb = int(np.floor(p / 100.0 * len(test)))
    rng = np.random.default_rng(seed)
    pos = rng.choice(len(test), size=n_perturb, replace=False)
    users[pos] = rng.integers(0, ds.m, size=n_perturb)
    services[pos] = rng.integers(0, ds.n, size=n_perturb)
    return CorruptedTestSet(
        noise_ratio=p, perturbed_indices=pos,
        users=users, services=services, values=values,
    )


def clean_test_set(split, ds):
    """The uncorrupted test triplets in the same container."""
    test = split.test
    return CorruptedTestSet(
        noise_ratio=0.0,
        perturbed_indices=np.empty(0, dtype=np.int64),
        users=ds.users[test].copy(),
        services=ds.services[test].copy(),
        values=ds.values[test].copy(),
    )


def export_split_manifest(split, path):
    """Write an (index, section) CSV for audit."""
    with open(path, "w") as f:
        f.write("index,section\n")
        for name in ("train", "val", "test"):
            for idx in getattr(split, name):
                f.write(f"{idx},{name}\n")
