"""Domain types for the video, the player configuration and the buffer.

Bitrate indices are 1-based everywhere in the public API: level 1 is the
highest bitrate, level M the lowest.  Buffer occupancy is counted in chunks
internally; anything user-facing reports seconds (chunks * p).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .errors import InvalidManifestError, ParameterError

MANIFEST_SCHEMA = "bolalab.manifest/1"


class Variant(str, enum.Enum):
    BASIC = "basic"
    FINITE = "finite"
    O = "o"
    U = "u"
    # naive throughput-following baseline, not a BOLA variant
    THROUGHPUT = "throughput"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.lower().strip()
        if key.startswith("bola-"):
            key = key[len("bola-"):]
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ParameterError(f"unknown variant {text!r} (expected one of {names})") from None

    @property
    def uses_dynamic_v(self) -> bool:
        return self in (Variant.FINITE, Variant.O, Variant.U)


@dataclass(frozen=True)
class BitrateLevel:
    index: int
    nominal_bitrate: float  # bits/s
    utility: float
    mean_chunk_size: float  # bits
    sizes: tuple  # bits, one per chunk

    def size(self, n: int) -> float:
        """Size in bits of chunk ``n`` (1-based)."""
        return self.sizes[n - 1]


@dataclass(frozen=True)
class VideoManifest:
    chunk_duration: float
    levels: tuple

    def __post_init__(self):
        if not self.chunk_duration > 0:
            raise InvalidManifestError("chunk duration must be positive")
        if not self.levels:
            raise InvalidManifestError("manifest needs at least one bitrate level")
        n = len(self.levels[0].sizes)
        if n < 1:
            raise InvalidManifestError("manifest needs at least one chunk")
        for lvl in self.levels:
            if len(lvl.sizes) != n:
                raise InvalidManifestError(
                    f"level {lvl.index} has {len(lvl.sizes)} chunk sizes, expected {n}"
                )
            if any(not (s > 0) for s in lvl.sizes):
                raise InvalidManifestError(f"level {lvl.index} has a non-positive chunk size")
        for a, b in zip(self.levels, self.levels[1:]):
            if a.utility < b.utility:
                raise InvalidManifestError(
                    f"utilities must be non-increasing in level index (level {a.index} < level {b.index})"
                )
        for j in range(n):
            col = [lvl.sizes[j] for lvl in self.levels]
            if any(x < y for x, y in zip(col, col[1:])):
                raise InvalidManifestError(f"chunk {j + 1}: sizes must be non-increasing in level index")

    @property
    def chunk_count(self) -> int:
        return len(self.levels[0].sizes)

    @property
    def level_count(self) -> int:
        return len(self.levels)

    @property
    def p(self) -> float:
        return self.chunk_duration

    @property
    def utilities(self) -> list:
        return [lvl.utility for lvl in self.levels]

    @property
    def mean_sizes(self) -> list:
        return [lvl.mean_chunk_size for lvl in self.levels]

    @property
    def bitrates(self) -> list:
        return [lvl.nominal_bitrate for lvl in self.levels]

    def level(self, m: int) -> BitrateLevel:
        return self.levels[m - 1]

    def chunk_sizes(self, n: int) -> list:
        """Sizes of chunk ``n`` at every level, index 0 = level 1."""
        return [lvl.sizes[n - 1] for lvl in self.levels]

    def with_utilities(self, utilities: Sequence[float]) -> "VideoManifest":
        if len(utilities) != self.level_count:
            raise InvalidManifestError("one utility per level required")
        levels = tuple(replace(lvl, utility=float(u)) for lvl, u in zip(self.levels, utilities))
        return VideoManifest(self.chunk_duration, levels)

    def repeat_to(self, chunk_count: int) -> "VideoManifest":
        """Lengthen (or truncate) the video by cycling through its chunks."""
        if chunk_count < 1:
            raise ParameterError("chunk count must be at least 1")
        n0 = self.chunk_count
        levels = tuple(
            replace(lvl, sizes=tuple(lvl.sizes[i % n0] for i in range(chunk_count)))
            for lvl in self.levels
        )
        return VideoManifest(self.chunk_duration, levels)


def build_manifest(chunk_duration, sizes, utilities=None, bitrates=None, mean_sizes=None):
    """Build a manifest from a per-level list of per-chunk sizes (bits).

    ``mean_sizes`` defaults to the empirical mean of each level's sizes and
    ``bitrates`` to mean_size / p.  When ``utilities`` is omitted they are the
    log utilities of the mean sizes.
    """
    if not sizes:
        raise InvalidManifestError("manifest needs at least one bitrate level")
    if mean_sizes is None:
        mean_sizes = [math.fsum(col) / len(col) if len(col) else 0.0 for col in sizes]
    if bitrates is None:
        bitrates = [s / chunk_duration for s in mean_sizes]
    auto_utility = utilities is None
    if auto_utility:
        utilities = [0.0] * len(sizes)
    levels = tuple(
        BitrateLevel(
            index=i + 1,
            nominal_bitrate=float(bitrates[i]),
            utility=float(utilities[i]),
            mean_chunk_size=float(mean_sizes[i]),
            sizes=tuple(float(s) for s in sizes[i]),
        )
        for i in range(len(sizes))
    )
    manifest = VideoManifest(float(chunk_duration), levels)
    return log_utilities(manifest) if auto_utility else manifest


def log_utilities(manifest: VideoManifest) -> VideoManifest:
    """Set each level's utility to ln(S_m / S_M) using mean chunk sizes."""
    means = manifest.mean_sizes
    if any(not (s > 0) for s in means):
        raise InvalidManifestError("mean chunk sizes must be positive")
    smallest = means[-1]
    utilities = [math.log(s / smallest) for s in means]
    utilities[-1] = 0.0
    return manifest.with_utilities(utilities)


def derive_v(buffer_chunks: float, top_utility: float, gamma_p: float) -> float:
    """Largest V that keeps the buffer within ``buffer_chunks``."""
    if not buffer_chunks > 1:
        raise ParameterError(f"buffer must exceed one chunk (got {buffer_chunks})")
    if not gamma_p > 0:
        raise ParameterError("gamma_p must be positive")
    return (buffer_chunks - 1) / (top_utility + gamma_p)


def derive_gamma_v(safe_buffer: float, max_buffer: float, manifest: VideoManifest):
    """Solve for (gamma_p, V) from a safe buffer level and a buffer cap (seconds).

    The safe level is where the lowest level stops being the argmax.  Level M
    is overtaken first by whichever level j < M has the smallest crossing
    offset ``k_j`` below; the crossing sits at ``V * (gamma_p + k_j)`` with

        k_j = (S_j * u_M - S_M * u_j) / (S_j - S_M)

    Combined with V = (Qmax - 1) / (u_1 + gamma_p) this gives

        gamma_p = ((Qmax - 1) * k - s * u_1) / (s - (Qmax - 1)),  s = safe / p

    For the usual ladders j = M - 1.
    """
    if not 0 < safe_buffer < max_buffer:
        raise ParameterError("need 0 < safe_buffer < max_buffer")
    if manifest.level_count < 2:
        raise ParameterError("need at least two bitrate levels")
    p = manifest.chunk_duration
    sizes = manifest.mean_sizes
    u = manifest.utilities
    s_low, u_low = sizes[-1], u[-1]
    offsets = []
    for j in range(manifest.level_count - 1):
        if sizes[j] == s_low:
            raise ParameterError(
                f"levels {j + 1} and {manifest.level_count} have equal sizes; thresholds never cross"
            )
        offsets.append((sizes[j] * u_low - s_low * u[j]) / (sizes[j] - s_low))
    k = min(offsets)
    s = safe_buffer / p
    a = max_buffer / p - 1
    if a <= 0 or s == a:
        raise ParameterError("safe and maximum buffer levels admit no solution")
    gamma_p = (a * k - s * u[0]) / (s - a)
    if not gamma_p > 0:
        raise ParameterError(
            f"no positive gamma_p satisfies safe={safe_buffer}s, max={max_buffer}s (got {gamma_p:.6g})"
        )
    return gamma_p, a / (u[0] + gamma_p)


@dataclass(frozen=True)
class PlayerConfig:
    gamma_p: float
    V: Optional[float] = None
    buffer_chunks: Optional[float] = None
    variant: Variant = Variant.BASIC
    abandonment_enabled: Optional[bool] = None
    abandonment_tick: float = 0.25
    minimum_buffer_chunks: float = 3.0
    max_abandons: Optional[int] = None  # None: until the lowest level

    def __post_init__(self):
        if not self.gamma_p > 0:
            raise ParameterError("gamma_p must be positive")
        if self.V is None and self.buffer_chunks is None:
            raise ParameterError("give V or buffer_chunks")
        if self.V is not None and not self.V > 0:
            raise ParameterError("V must be positive")
        if self.buffer_chunks is not None and not self.buffer_chunks > 1:
            raise ParameterError("buffer_chunks must exceed 1")
        if self.max_abandons is not None and self.max_abandons < 0:
            raise ParameterError("max_abandons cannot be negative")
        if not self.abandonment_tick > 0:
            raise ParameterError("abandonment_tick must be positive")
        if not isinstance(self.variant, Variant):
            object.__setattr__(self, "variant", Variant.parse(str(self.variant)))

    @property
    def abandonment(self) -> bool:
        if self.abandonment_enabled is None:
            return self.variant.uses_dynamic_v
        return self.abandonment_enabled

    def resolve(self, top_utility: float):
        """Return (V, Q_max) with whichever one was omitted derived from the other."""
        if self.V is not None and self.buffer_chunks is not None:
            return self.V, self.buffer_chunks
        if self.V is not None:
            return self.V, self.V * (top_utility + self.gamma_p) + 1
        return derive_v(self.buffer_chunks, top_utility, self.gamma_p), self.buffer_chunks

    def complies(self, top_utility: float) -> bool:
        """Whether V and Q_max satisfy the buffer-bound precondition."""
        v, qmax = self.resolve(top_utility)
        return 0 < v <= (qmax - 1) / (top_utility + self.gamma_p) * (1 + 1e-12)


@dataclass
class BufferState:
    Q: float = 0.0
    playhead: float = 0.0
    next_chunk: int = 1

    def __post_init__(self):
        if self.Q < 0:
            raise ParameterError("buffer level cannot be negative")


# -- manifest files ----------------------------------------------------------


def manifest_to_dict(manifest: VideoManifest) -> dict:
    return {
        "schema": MANIFEST_SCHEMA,
        "chunk_duration_s": manifest.chunk_duration,
        "chunk_count": manifest.chunk_count,
        "levels": [
            {
                "nominal_bitrate_kbps": lvl.nominal_bitrate / 1000.0,
                "utility": lvl.utility,
                "mean_size_bits": lvl.mean_chunk_size,
                "sizes_bits": list(lvl.sizes),
            }
            for lvl in manifest.levels
        ],
    }


def manifest_from_dict(data: dict) -> VideoManifest:
    try:
        p = float(data["chunk_duration_s"])
        raw = data["levels"]
        sizes = [[float(s) for s in lvl["sizes_bits"]] for lvl in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidManifestError(f"malformed manifest: {exc}") from None
    count = data.get("chunk_count")
    if count is not None and any(len(col) != int(count) for col in sizes):
        raise InvalidManifestError("chunk_count disagrees with the size lists")
    means = [
        float(lvl["mean_size_bits"]) if "mean_size_bits" in lvl else math.fsum(col) / max(len(col), 1)
        for lvl, col in zip(raw, sizes)
    ]
    bitrates = [
        float(lvl["nominal_bitrate_kbps"]) * 1000.0 if "nominal_bitrate_kbps" in lvl else m / p
        for lvl, m in zip(raw, means)
    ]
    have_util = [("utility" in lvl and lvl["utility"] is not None) for lvl in raw]
    if any(have_util) and not all(have_util):
        raise InvalidManifestError("utility must be given for every level or none")
    utilities = [float(lvl["utility"]) for lvl in raw] if all(have_util) else None
    return build_manifest(p, sizes, utilities=utilities, bitrates=bitrates, mean_sizes=means)


def save_manifest(manifest: VideoManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(manifest), indent=1) + "\n")


def load_manifest(path) -> VideoManifest:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidManifestError(f"{path}: not valid JSON ({exc})") from None
    return manifest_from_dict(data)
