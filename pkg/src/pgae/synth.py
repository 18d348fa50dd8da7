"""Procedural tabletop corpus: two cubes, one of them pushed, pulled or slid
by an arm whose 5 joint angles follow minimum-jerk segments.

Counts: 3 verbs x 6 colours x 2 speeds = 36 meaning triples; x 2 target
sides x 2 distractor colours = 144 patterns; x 6 random variations = 864
samples. Each sample gets one of the 8 synonymous spellings of its meaning,
handed out round-robin so all 288 strings occur.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .grammar import COLOURS, SPEEDS, VERBS, surface_strings
from .numerics import RngStream

VERB_NAMES = tuple(VERBS)
COLOUR_NAMES = tuple(COLOURS)
SPEED_NAMES = tuple(SPEEDS)
SIDES = ("left", "right")
VIEWPOINTS = ("self", "opposite")
VARIATIONS = 6
TEST_PER_TRIPLE = 6

RGB = {
    "red": (0.9, 0.1, 0.1),
    "green": (0.1, 0.75, 0.15),
    "blue": (0.1, 0.2, 0.9),
    "yellow": (0.95, 0.9, 0.1),
    "cyan": (0.1, 0.85, 0.9),
    "violet": (0.6, 0.15, 0.85),
}
TABLE_RGB = (0.55, 0.42, 0.3)
EFFECTOR_RGB = (0.85, 0.85, 0.85)

DESK_SIZE = (60, 80)
FULL_SIZE = (120, 160)

# scene geometry in table units: x left->right, y far->near as seen by the robot
CUBE_X = {"left": 0.3, "right": 0.7}
CUBE_Y = 0.45
CUBE_HALF = 0.08  # in units of image width
PUSH_DIST = 0.2
SLIDE_DIST = 0.15
EFFECTOR_R = 0.045
JITTER = 0.03


@dataclass(frozen=True)
class Pattern:
    verb: str
    colour: str
    speed: str
    side: str
    distractor_choice: int

    @property
    def distractor(self) -> str:
        k = COLOUR_NAMES.index(self.colour)
        return COLOUR_NAMES[(k + (1, 3)[self.distractor_choice]) % len(COLOUR_NAMES)]

    @property
    def action(self) -> int:
        """Motor action id in 0..11 (verb, side, speed)."""
        return (VERB_NAMES.index(self.verb) * 2 + SIDES.index(self.side)) * 2 + SPEED_NAMES.index(self.speed)

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.verb, self.colour, self.speed)

    @property
    def length(self) -> int:
        return 100 if self.speed == "slow" else 50

    def to_dict(self) -> dict:
        return asdict(self)


def sequence_length(speed: str) -> int:
    return 100 if speed == "slow" else 50


def enumerate_patterns() -> list[Pattern]:
    return [
        Pattern(v, c, s, side, d)
        for v, c, s, side, d in itertools.product(VERB_NAMES, COLOUR_NAMES, SPEED_NAMES, SIDES, (0, 1))
    ]


def min_jerk(tau):
    """Normalised minimum-jerk position profile on [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


HOME = np.array([0.0, -0.6, 0.4, 0.0, 0.2])


def waypoints(pattern: Pattern) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Home, contact and end postures (normalised joint units)."""
    yaw = -0.4 if pattern.side == "left" else 0.4
    outward = -1.0 if pattern.side == "left" else 1.0
    if pattern.verb == "push":
        contact = [yaw, 0.0, 0.1, 0.3, -0.2]
        end = [yaw, 0.5, -0.3, 0.3, -0.2]
    elif pattern.verb == "pull":
        contact = [yaw, 0.45, -0.25, -0.3, 0.4]
        end = [yaw, -0.05, 0.15, -0.3, 0.4]
    else:
        contact = [yaw * 0.7, 0.2, 0.0, 0.0, 0.6]
        end = [yaw * 0.7 + 0.3 * outward, 0.2, 0.0, 0.0, 0.6]
    return HOME.copy(), np.array(contact), np.array(end)


def gen_trajectory(pattern: Pattern, rng: RngStream) -> np.ndarray:
    """M x 5 joints: home -> contact over the first half, contact -> end over
    the second, each segment on a minimum-jerk profile."""
    home, contact, end = waypoints(pattern)
    contact = contact + rng.uniform(-JITTER, JITTER, size=5)
    end = end + rng.uniform(-JITTER, JITTER, size=5)
    M = pattern.length
    tau = np.linspace(0.0, 1.0, M)
    s1 = min_jerk(tau / 0.5)[:, None]
    s2 = min_jerk((tau - 0.5) / 0.5)[:, None]
    traj = home + s1 * (contact - home) + s2 * (end - contact)
    return np.clip(traj, -1.0, 1.0)


def scene_layout(pattern: Pattern, tau: float, offset=(0.0, 0.0)):
    """Positions in table units: (target xy, distractor xy, effector xy)."""
    other = "right" if pattern.side == "left" else "left"
    tx, ty = CUBE_X[pattern.side] + offset[0], CUBE_Y + offset[1]
    dx, dy = CUBE_X[other] + offset[0], CUBE_Y + offset[1]
    outward = -1.0 if pattern.side == "left" else 1.0
    s = float(min_jerk((tau - 0.5) / 0.5))
    gap = CUBE_HALF + EFFECTOR_R
    if pattern.verb == "push":
        move, contact = (0.0, -PUSH_DIST), (0.0, gap)
    elif pattern.verb == "pull":
        move, contact = (0.0, PUSH_DIST), (0.0, -gap)
    else:
        move, contact = (outward * SLIDE_DIST, 0.0), (-outward * gap, 0.0)
    tx, ty = tx + s * move[0], ty + s * move[1]
    cx, cy = tx + contact[0], ty + contact[1]
    # effector enters from the robot's edge of the table (y = 1.1)
    a = float(min_jerk(tau / 0.5))
    start = (CUBE_X[pattern.side] + contact[0], 1.1)
    ex, ey = start[0] + a * (cx - start[0]), start[1] + a * (cy - start[1])
    return (tx, ty), (dx, dy), (ex, ey)


def to_view(xy, viewpoint: str):
    """Map table coordinates into the camera frame; the opposite agent's
    scene appears rotated by 180 degrees."""
    x, y = xy
    if viewpoint == "opposite":
        return 1.0 - x, 1.0 - y
    return x, y


def render_frame(pattern: Pattern, tau: float, viewpoint: str = "self", size=DESK_SIZE, offset=(0.0, 0.0)) -> np.ndarray:
    """H x W x 3 uint8 image of the scene at phase ``tau``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"phase must lie in [0, 1], got {tau}")
    if viewpoint not in VIEWPOINTS:
        raise ValueError(f"unknown viewpoint {viewpoint!r}")
    H, W = size
    img = np.empty((H, W, 3))
    img[:] = TABLE_RGB
    rows = (np.arange(H) + 0.5)[:, None]
    cols = (np.arange(W) + 0.5)[None, :]
    target, distractor, effector = scene_layout(pattern, tau, offset)
    half = CUBE_HALF * W
    for xy, colour in ((distractor, pattern.distractor), (target, pattern.colour)):
        x, y = to_view(xy, viewpoint)
        inside = (np.abs(cols - x * W) <= half) & (np.abs(rows - y * H) <= half)
        img[inside] = RGB[colour]
    x, y = to_view(effector, viewpoint)
    disc = (cols - x * W) ** 2 + (rows - y * H) ** 2 <= (EFFECTOR_R * W) ** 2
    img[disc] = EFFECTOR_RGB
    return np.round(img * 255.0).astype(np.uint8)


def render_sequence(pattern: Pattern, viewpoint: str, size=DESK_SIZE, offset=(0.0, 0.0)) -> np.ndarray:
    M = pattern.length
    return np.stack([render_frame(pattern, k / (M - 1), viewpoint, size, offset) for k in range(M)])


# --- file formats -----------------------------------------------------------


def write_ppm(path, img: np.ndarray) -> None:
    H, W, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (W, H))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary P6 file")
    W, H, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PPM is supported")
    return np.frombuffer(parts[4][: H * W * 3], dtype=np.uint8).reshape(H, W, 3)


def write_matrix_csv(path, arr: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in arr:
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


# --- corpus -------------------------------------------------------------------


@dataclass
class SampleRecord:
    name: str
    index: int
    pattern: Pattern
    variation: int
    description: str
    seed: int
    offset: tuple[float, float]

    @property
    def action(self) -> int:
        return self.pattern.action

    def to_dict(self) -> dict:
        d = asdict(self)
        d["offset"] = list(self.offset)
        d["action"] = self.action
        d["length"] = self.pattern.length
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(d["name"], d["index"], Pattern(**d["pattern"]), d["variation"], d["description"], d["seed"], tuple(d["offset"]))


def plan_corpus(seed: int) -> list[SampleRecord]:
    """All 864 sample records with descriptions and per-sample seeds."""
    records = []
    per_triple_counter: dict[tuple, int] = {}
    for p in enumerate_patterns():
        strings = surface_strings(*p.triple)
        for v in range(VARIATIONS):
            idx = len(records)
            k = per_triple_counter.get(p.triple, 0)
            per_triple_counter[p.triple] = k + 1
            sample_seed = (seed ^ idx) & ((1 << 64) - 1)
            rng = RngStream(sample_seed)
            offset = (rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02))
            records.append(SampleRecord(f"s{idx:03d}", idx, p, v, strings[k % len(strings)], sample_seed, offset))
    return records


def sample_joints(rec: SampleRecord) -> np.ndarray:
    rng = RngStream(rec.seed)
    rng.uniform(size=2)  # the draws spent on the scene offset
    return gen_trajectory(rec.pattern, rng)


def sample_frames(rec: SampleRecord, viewpoint: str, size=DESK_SIZE) -> np.ndarray:
    return render_sequence(rec.pattern, viewpoint, size, rec.offset)


def split_key(rec: SampleRecord) -> tuple:
    """(description, motor action, arrangement); the action already fixes the side."""
    return (rec.description, rec.action, rec.pattern.side)


def split(records: list[SampleRecord], seed: int) -> tuple[list[str], list[str]]:
    """Hold out 6 samples per meaning triple, 216 in total.

    Whole (description, action, arrangement) groups move together, so no
    such combination in test occurs in train. Both sides of every triple are
    held out, so every motor action is tested.
    """
    rng = RngStream(seed ^ 0x5EED5EED)
    by_triple: dict[tuple, dict[tuple, list[str]]] = {}
    for r in records:
        by_triple.setdefault(r.pattern.triple, {}).setdefault(split_key(r), []).append(r.name)
    test: set[str] = set()
    for triple in sorted(by_triple):
        groups = sorted(by_triple[triple].items())
        for _ in range(1000):
            order = rng.permutation(len(groups))
            chosen, total = [], 0
            for gi in order:
                n = len(groups[gi][1])
                if total + n <= TEST_PER_TRIPLE:
                    chosen.append(gi)
                    total += n
            sides = {groups[gi][0][2] for gi in chosen}
            if total == TEST_PER_TRIPLE and sides == set(SIDES):
                break
        else:
            raise RuntimeError(f"no feasible test selection for {triple}")
        for gi in chosen:
            test.update(groups[gi][1])
    train = [r.name for r in records if r.name not in test]
    return train, [r.name for r in records if r.name in test]


def build_dataset(out_dir, seed: int = 0, size=DESK_SIZE, frames: bool = True, subset=None) -> dict:
    """Write the corpus to ``out_dir`` and return the manifest.

    ``subset`` restricts which samples get per-sample directories (the
    manifest always lists the whole corpus).
    """
    out = Path(out_dir)
    records = plan_corpus(seed)
    train, test = split(records, seed)
    wanted = set(subset) if subset is not None else None
    for rec in records:
        if wanted is not None and rec.name not in wanted:
            continue
        d = out / "samples" / rec.name
        try:
            d.mkdir(parents=True, exist_ok=True)
            meta = rec.to_dict() | {"frame_size": list(size), "viewpoints": list(VIEWPOINTS)}
            (d / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
            write_matrix_csv(d / "joints.csv", sample_joints(rec))
            if frames:
                for vp in VIEWPOINTS:
                    fd = d / f"frames_{vp}"
                    fd.mkdir(exist_ok=True)
                    for k, img in enumerate(sample_frames(rec, vp, size)):
                        write_ppm(fd / f"{k:03d}.ppm", img)
        except OSError as exc:
            raise OSError(f"failed writing sample directory {d}: {exc}") from exc
    manifest = {
        "seed": seed,
        "frame_size": list(size),
        "grammar": {"verbs": VERBS, "colours": COLOURS, "speeds": SPEEDS},
        "patterns": [p.to_dict() | {"action": p.action} for p in enumerate_patterns()],
        "samples": [r.to_dict() for r in records],
        "split": {"train": train, "test": test},
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


def load_manifest(data_dir) -> dict:
    return json.loads((Path(data_dir) / "manifest.json").read_text())


def records_from_manifest(manifest: dict) -> list[SampleRecord]:
    return [SampleRecord.from_dict(d) for d in manifest["samples"]]


def load_frames(data_dir, rec: SampleRecord, viewpoint: str, size=DESK_SIZE) -> np.ndarray:
    """Frames from disk when present, otherwise re-rendered (deterministic)."""
    fd = Path(data_dir) / "samples" / rec.name / f"frames_{viewpoint}"
    if fd.is_dir():
        files = sorted(fd.glob("*.ppm"))
        if files:
            return np.stack([read_ppm(f) for f in files])
    return sample_frames(rec, viewpoint, size)


def load_joints(data_dir, rec: SampleRecord) -> np.ndarray:
    path = Path(data_dir) / "samples" / rec.name / "joints.csv"
    if path.exists():
        return read_matrix_csv(path)
    return np.round(sample_joints(rec), 6)


def micro_set(records: list[SampleRecord]) -> list[SampleRecord]:
    """First sample of each of the 12 motor actions."""
    seen: dict[int, SampleRecord] = {}
    for r in records:
        seen.setdefault(r.action, r)
    return [seen[a] for a in sorted(seen)]
