"""Immutable floating-base kinematic trees: forward kinematics, frame
Jacobians, JSON model-file (de)serialization, and procedural generation of
human-like chains.

Joint ordering is the declaration order of the ``joints`` list and fixes the
indexing of the joint vector ``s`` everywhere. Velocities are stacked as
(base_lin, base_ang, s_dot) with the base angular velocity expressed in the
inertial frame.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._kernels import fk_chain, pose_residual_kernel, rotation_about_axis, stacked_jacobian_kernel
from .errors import ParseError, UnknownFrame, ValidationError
from .so3 import Rotation

AXIS_TOL = 1e-9


def rpy_matrix(rpy) -> np.ndarray:
    """Fixed-axis roll-pitch-yaw: Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    r, p, y = np.asarray(rpy, dtype=float)
    rz = rotation_about_axis(np.array([0.0, 0.0, 1.0]), y)
    ry = rotation_about_axis(np.array([0.0, 1.0, 0.0]), p)
    rx = rotation_about_axis(np.array([1.0, 0.0, 0.0]), r)
    return rz @ ry @ rx


@dataclass(frozen=True)
class Link:
    name: str
    is_dummy: bool = False


@dataclass(frozen=True, eq=False)
class Joint:
    """Single-DoF revolute joint attaching ``child`` below ``parent``."""

    name: str
    parent: str
    child: str
    axis: np.ndarray
    origin_xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    origin_rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    pos_limits: tuple[float, float] | None = None
    vel_limit: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=float))
        object.__setattr__(self, "origin_xyz", np.asarray(self.origin_xyz, dtype=float))
        object.__setattr__(self, "origin_rpy", np.asarray(self.origin_rpy, dtype=float))


class StackedPose(NamedTuple):
    positions: np.ndarray  # (n_p, 3)
    rotations: np.ndarray  # (n_o, 3, 3)


@dataclass(frozen=True, eq=False)
class ExtraConstraints:
    """User-supplied joint-coupling rows A s <= b_q with velocity bounds b_nu
    (np.inf marks an unbounded entry)."""

    a: np.ndarray
    b_q: np.ndarray
    b_nu: np.ndarray


class KinematicModel:
    """Validated kinematic tree with precomputed arrays for the kernels.

    Immutable after construction; forward kinematics and Jacobian calls are
    pure and reentrant, so one instance can be shared across threads.
    """

    def __init__(self, links, joints, base_link, position_targets=(),
                 orientation_targets=(), extra_constraints=None):
        self.links = tuple(links)
        self.joints = tuple(joints)
        self.base_link = base_link
        self.position_target_frames = tuple(position_targets)
        self.orientation_target_frames = tuple(orientation_targets)
        self.extra_constraints = extra_constraints
        self._validate()
        self._precompute()

    # -- validation -------------------------------------------------------

    def _validate(self):
        names = [l.name for l in self.links]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})[0]
            raise ValidationError("duplicate link", dup)
        jnames = [j.name for j in self.joints]
        if len(set(jnames)) != len(jnames):
            dup = sorted({n for n in jnames if jnames.count(n) > 1})[0]
            raise ValidationError("duplicate joint", dup)
        known = set(names)
        if self.base_link not in known:
            raise ValidationError("unknown base link", self.base_link)
        child_of = {}
        for j in self.joints:
            if j.parent not in known:
                raise ValidationError("unknown parent link", f"{j.name}: {j.parent}")
            if j.child not in known:
                raise ValidationError("unknown child link", f"{j.name}: {j.child}")
            if j.child in child_of:
                raise ValidationError("multiple parents", j.child)
            if j.child == self.base_link:
                raise ValidationError("base link has a parent", j.name)
            child_of[j.child] = j
            if abs(np.linalg.norm(j.axis) - 1.0) > AXIS_TOL:
                raise ValidationError("non-unit axis", j.name)
            if j.pos_limits is not None:
                lo, hi = j.pos_limits
                if not lo <= hi:
                    raise ValidationError("inverted limits", j.name)
            if j.vel_limit is not None and not j.vel_limit > 0.0:
                raise ValidationError("non-positive velocity limit", j.name)
        # every non-base link needs a parent; walking to the base must not cycle
        for name in known:
            if name == self.base_link:
                continue
            if name not in child_of:
                raise ValidationError("disconnected link", name)
            seen = {name}
            cur = name
            while cur != self.base_link:
                cur = child_of[cur].parent
                if cur in seen:
                    raise ValidationError("cycle", name)
                seen.add(cur)
        for frame in (*self.position_target_frames, *self.orientation_target_frames):
            if frame not in known:
                raise ValidationError("unknown target frame", frame)
        if self.extra_constraints is not None:
            ec = self.extra_constraints
            n = len(self.joints)
            if ec.a.ndim != 2 or ec.a.shape[1] != n:
                raise ValidationError("constraint shape", f"A must have {n} columns")
            m = ec.a.shape[0]
            if ec.b_q.shape != (m,) or ec.b_nu.shape != (m,):
                raise ValidationError("constraint shape", "b_q/b_nu length mismatch")
            if not np.all(np.isfinite(ec.a)):
                raise ValidationError("non-finite constraint", "A")

    # -- precomputed arrays -------------------------------------------------

    def _precompute(self):
        self._link_index = {l.name: i for i, l in enumerate(self.links)}
        n_links = len(self.links)
        self._parent = np.full(n_links, -1, dtype=np.int64)
        self._joint_of = np.full(n_links, -1, dtype=np.int64)
        self._origin_p = np.zeros((n_links, 3))
        self._origin_r = np.tile(np.eye(3), (n_links, 1, 1))
        self._axis = np.zeros((n_links, 3))
        for jidx, j in enumerate(self.joints):
            c = self._link_index[j.child]
            self._parent[c] = self._link_index[j.parent]
            self._joint_of[c] = jidx
            self._origin_p[c] = j.origin_xyz
            self._origin_r[c] = rpy_matrix(j.origin_rpy)
            self._axis[c] = j.axis
        # parents before children
        order = []
        depth = {self._link_index[self.base_link]: 0}
        pending = list(range(n_links))
        while pending:
            rest = []
            for l in pending:
                p = self._parent[l]
                if p < 0 or p in depth:
                    depth[l] = 0 if p < 0 else depth[p] + 1
                    order.append(l)
                else:
                    rest.append(l)
            pending = rest
        self._topo = np.array(order, dtype=np.int64)
        self._pos_idx = np.array([self._link_index[f] for f in self.position_target_frames],
                                 dtype=np.int64)
        self._ori_idx = np.array([self._link_index[f] for f in self.orientation_target_frames],
                                 dtype=np.int64)
        self._base_idx = self._link_index[self.base_link]
        self._assemble_constraints()

    def _assemble_constraints(self):
        n = self.n
        rows, b_q, b_nu = [], [], []
        for jidx, j in enumerate(self.joints):
            if j.pos_limits is None and j.vel_limit is None:
                continue
            lo, hi = j.pos_limits if j.pos_limits is not None else (-np.inf, np.inf)
            vel = j.vel_limit if j.vel_limit is not None else np.inf
            up = np.zeros(n)
            up[jidx] = 1.0
            rows.append(up)
            b_q.append(hi)
            b_nu.append(vel)
            rows.append(-up)
            b_q.append(-lo)
            b_nu.append(vel)
        if self.extra_constraints is not None:
            for i in range(self.extra_constraints.a.shape[0]):
                rows.append(self.extra_constraints.a[i])
                b_q.append(self.extra_constraints.b_q[i])
                b_nu.append(self.extra_constraints.b_nu[i])
        if rows:
            self.constraint_matrix = np.array(rows)
            self.config_bounds = np.array(b_q)
            self.vel_bounds = np.array(b_nu)
        else:
            self.constraint_matrix = np.zeros((0, n))
            self.config_bounds = np.zeros(0)
            self.vel_bounds = np.zeros(0)

    # -- basic queries ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def n_p(self) -> int:
        return len(self.position_target_frames)

    @property
    def n_o(self) -> int:
        return len(self.orientation_target_frames)

    def link_index(self, frame: str) -> int:
        try:
            return self._link_index[frame]
        except KeyError:
            raise UnknownFrame(frame) from None

    def physical_links(self):
        return tuple(l.name for l in self.links if not l.is_dummy)

    # -- kinematics ---------------------------------------------------------

    def fk_arrays(self, q: "Configuration") -> tuple[np.ndarray, np.ndarray]:
        """World position and rotation of every link (kernel layout)."""
        return fk_chain(self._topo, self._parent, self._joint_of, self._origin_p,
                        self._origin_r, self._axis, np.ascontiguousarray(q.s, dtype=float),
                        np.ascontiguousarray(q.base_pos, dtype=float),
                        np.ascontiguousarray(q.base_rot.m, dtype=float))

    def forward_kinematics(self, q: "Configuration", frame: str) -> tuple[np.ndarray, Rotation]:
        idx = self.link_index(frame)
        pos, rot = self.fk_arrays(q)
        return pos[idx].copy(), Rotation.drifting(rot[idx].copy())

    def jacobian(self, q: "Configuration", frame: str) -> np.ndarray:
        """6x(n+6) frame Jacobian; top three rows linear, bottom three angular."""
        idx = np.array([self.link_index(frame)], dtype=np.int64)
        pos, rot = self.fk_arrays(q)
        return stacked_jacobian_kernel(self._parent, self._joint_of, self._axis,
                                       idx, idx, pos, rot, pos[self._base_idx], self.n)

    def stacked_forward_kinematics(self, q: "Configuration") -> StackedPose:
        """Poses of all declared target frames: positions first, then rotations."""
        pos, rot = self.fk_arrays(q)
        return StackedPose(pos[self._pos_idx].copy(), rot[self._ori_idx].copy())

    def stacked_jacobian(self, q: "Configuration", fk=None) -> np.ndarray:
        pos, rot = fk if fk is not None else self.fk_arrays(q)
        return stacked_jacobian_kernel(self._parent, self._joint_of, self._axis,
                                       self._pos_idx, self._ori_idx, pos, rot,
                                       pos[self._base_idx], self.n)

    def pose_residual_arrays(self, fk, target_pos, target_rot) -> np.ndarray:
        pos, rot = fk
        return pose_residual_kernel(self._pos_idx, self._ori_idx, pos, rot,
                                    target_pos, target_rot)

    # -- serialization ------------------------------------------------------

    def serialize(self) -> str:
        def enc(v):
            return None if np.isinf(v) else float(v)

        doc = {
            "base_link": self.base_link,
            "links": [{"name": l.name, "dummy": True} if l.is_dummy else {"name": l.name}
                      for l in self.links],
            "joints": [],
            "position_targets": list(self.position_target_frames),
            "orientation_targets": list(self.orientation_target_frames),
        }
        for j in self.joints:
            entry = {
                "name": j.name,
                "parent": j.parent,
                "child": j.child,
                "axis": [float(v) for v in j.axis],
                "origin": {"xyz": [float(v) for v in j.origin_xyz],
                           "rpy": [float(v) for v in j.origin_rpy]},
            }
            if j.pos_limits is not None:
                entry["pos_limits"] = [float(j.pos_limits[0]), float(j.pos_limits[1])]
            if j.vel_limit is not None:
                entry["vel_limit"] = float(j.vel_limit)
            doc["joints"].append(entry)
        if self.extra_constraints is not None:
            ec = self.extra_constraints
            doc["constraints"] = {
                "A": [[float(v) for v in row] for row in ec.a],
                "b_q": [enc(v) for v in ec.b_q],
                "b_nu": [enc(v) for v in ec.b_nu],
            }
        return json.dumps(doc, indent=2)


@dataclass(eq=False)
class Configuration:
    """Base position, base rotation, and joint angles."""

    base_pos: np.ndarray
    base_rot: Rotation
    s: np.ndarray

    def __post_init__(self):
        self.base_pos = np.asarray(self.base_pos, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if not isinstance(self.base_rot, Rotation):
            self.base_rot = Rotation(self.base_rot)

    @classmethod
    def zeros(cls, model: KinematicModel, base_pos=None) -> "Configuration":
        pos = np.zeros(3) if base_pos is None else np.asarray(base_pos, dtype=float)
        return cls(pos, Rotation.identity(), np.zeros(model.n))


@dataclass(eq=False)
class Velocity:
    """Base linear/angular velocity plus joint velocities."""

    base_lin: np.ndarray
    base_ang: np.ndarray
    s_dot: np.ndarray

    def __post_init__(self):
        self.base_lin = np.asarray(self.base_lin, dtype=float)
        self.base_ang = np.asarray(self.base_ang, dtype=float)
        self.s_dot = np.asarray(self.s_dot, dtype=float)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.base_lin, self.base_ang, self.s_dot])

    @classmethod
    def from_stacked(cls, nu) -> "Velocity":
        nu = np.asarray(nu, dtype=float)
        return cls(nu[0:3], nu[3:6], nu[6:])

    @classmethod
    def zeros(cls, model: KinematicModel) -> "Velocity":
        return cls(np.zeros(3), np.zeros(3), np.zeros(model.n))


# -- model file I/O ----------------------------------------------------------

_TOP_KEYS = {"base_link", "links", "joints", "position_targets",
             "orientation_targets", "constraints"}
_LINK_KEYS = {"name", "dummy"}
_JOINT_KEYS = {"name", "parent", "child", "axis", "origin", "pos_limits", "vel_limit"}
_ORIGIN_KEYS = {"xyz", "rpy"}
_CONSTRAINT_KEYS = {"A", "b_q", "b_nu"}


def _reject_unknown(obj, allowed, where):
    extra = set(obj) - allowed
    if extra:
        raise ValidationError("unknown key", f"{where}: {sorted(extra)[0]}")


def _bound(value, where):
    if value is None or value == "unbounded":
        return np.inf
    if isinstance(value, (int, float)):
        return float(value)
    raise ValidationError("bad bound", f"{where}: {value!r}")


def load_model(text: str) -> KinematicModel:
    """Parse and validate a JSON model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}",
                         line=e.lineno, column=e.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object")
    _reject_unknown(doc, _TOP_KEYS, "document")
    for key in ("base_link", "links", "joints"):
        if key not in doc:
            raise ValidationError("missing key", key)
    links = []
    for entry in doc["links"]:
        _reject_unknown(entry, _LINK_KEYS, f"link {entry.get('name', '?')}")
        links.append(Link(entry["name"], bool(entry.get("dummy", False))))
    joints = []
    for entry in doc["joints"]:
        _reject_unknown(entry, _JOINT_KEYS, f"joint {entry.get('name', '?')}")
        origin = entry.get("origin", {})
        _reject_unknown(origin, _ORIGIN_KEYS, f"joint {entry.get('name', '?')} origin")
        limits = entry.get("pos_limits")
        joints.append(Joint(
            name=entry["name"],
            parent=entry["parent"],
            child=entry["child"],
            axis=np.asarray(entry["axis"], dtype=float),
            origin_xyz=np.asarray(origin.get("xyz", [0.0, 0.0, 0.0]), dtype=float),
            origin_rpy=np.asarray(origin.get("rpy", [0.0, 0.0, 0.0]), dtype=float),
            pos_limits=(float(limits[0]), float(limits[1])) if limits is not None else None,
            vel_limit=float(entry["vel_limit"]) if entry.get("vel_limit") is not None else None,
        ))
    extra = None
    if "constraints" in doc:
        block = doc["constraints"]
        _reject_unknown(block, _CONSTRAINT_KEYS, "constraints")
        extra = ExtraConstraints(
            a=np.asarray(block["A"], dtype=float).reshape(len(block["A"]), -1),
            b_q=np.array([_bound(v, "b_q") for v in block["b_q"]]),
            b_nu=np.array([_bound(v, "b_nu") for v in block["b_nu"]]),
        )
    return KinematicModel(
        links=links,
        joints=joints,
        base_link=doc["base_link"],
        position_targets=doc.get("position_targets", []),
        orientation_targets=doc.get("orientation_targets", []),
        extra_constraints=extra,
    )


def serialize_model(model: KinematicModel) -> str:
    return model.serialize()


# -- procedural human-like chain ---------------------------------------------

# 23 body segments: (name, parent, offset scaled to a 1.75 m stature)
_SEGMENTS = (
    ("l5", "pelvis", (0.0, 0.0, 0.094)),
    ("l3", "l5", (0.0, 0.0, 0.096)),
    ("t12", "l3", (0.0, 0.0, 0.103)),
    ("t8", "t12", (0.0, 0.0, 0.121)),
    ("neck", "t8", (0.0, 0.0, 0.121)),
    ("head", "neck", (0.0, 0.0, 0.099)),
    ("right_shoulder", "t8", (0.0, -0.105, 0.071)),
    ("right_upper_arm", "right_shoulder", (0.0, -0.120, 0.0)),
    ("right_forearm", "right_upper_arm", (0.0, -0.282, 0.0)),
    ("right_hand", "right_forearm", (0.0, -0.257, 0.0)),
    ("left_shoulder", "t8", (0.0, 0.105, 0.071)),
    ("left_upper_arm", "left_shoulder", (0.0, 0.120, 0.0)),
    ("left_forearm", "left_upper_arm", (0.0, 0.282, 0.0)),
    ("left_hand", "left_forearm", (0.0, 0.257, 0.0)),
    ("right_upper_leg", "pelvis", (0.0, -0.088, -0.053)),
    ("right_lower_leg", "right_upper_leg", (0.0, 0.0, -0.422)),
    ("right_foot", "right_lower_leg", (0.0, 0.0, -0.434)),
    ("right_toe", "right_foot", (0.148, 0.0, -0.055)),
    ("left_upper_leg", "pelvis", (0.0, 0.088, -0.053)),
    ("left_lower_leg", "left_upper_leg", (0.0, 0.0, -0.422)),
    ("left_foot", "left_lower_leg", (0.0, 0.0, -0.434)),
    ("left_toe", "left_foot", (0.148, 0.0, -0.055)),
)

_AXES = {"z": (0.0, 0.0, 1.0), "x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0)}

# reduced-joint variant: axes kept per connection plus symmetric angle limits
_REDUCED = {
    "l5": "zxy", "l3": "zy", "t12": "zy", "t8": "zxy",
    "neck": "zxy", "head": "zxy",
    "right_shoulder": "zy", "right_upper_arm": "zxy",
    "right_forearm": "xy", "right_hand": "zx",
    "left_shoulder": "zy", "left_upper_arm": "zxy",
    "left_forearm": "xy", "left_hand": "zx",
    "right_upper_leg": "zxy", "right_lower_leg": "y",
    "right_foot": "yx", "right_toe": "y",
    "left_upper_leg": "zxy", "left_lower_leg": "y",
    "left_foot": "yx", "left_toe": "y",
}

_LIMITS = {
    "l5": 0.40, "l3": 0.40, "t12": 0.40, "t8": 0.40,
    "neck": 0.60, "head": 0.70,
    "right_shoulder": 0.85, "right_upper_arm": 1.60,
    "right_forearm": 1.40, "right_hand": 0.60,
    "left_shoulder": 0.85, "left_upper_arm": 1.60,
    "left_forearm": 1.40, "left_hand": 0.60,
    "right_upper_leg": 1.20, "right_lower_leg": 1.90,
    "right_foot": 0.80, "right_toe": 0.60,
    "left_upper_leg": 1.20, "left_lower_leg": 1.90,
    "left_foot": 0.80, "left_toe": 0.60,
}

_VEL_LIMIT = 8.0  # rad/s; keeps one tanh-shaped step from overshooting a limit


def generate_human_chain(dofs: int, seed: int) -> KinematicModel:
    """Deterministic 23-segment chain with 66 or 48 revolute DoFs.

    Multi-DoF connections are decomposed into z-x-y revolute triplets joined
    by zero-length dummy links. The 66-DoF variant is unconstrained; the
    48-DoF variant drops joints per connection, bounds every joint, and adds
    one coupled-joint constraint row. Geometry is jittered +-2% by ``seed``.
    """
    if dofs not in (66, 48):
        raise ValueError("dofs must be 66 or 48")
    rng = np.random.default_rng(seed)
    links = [Link("pelvis")]
    joints = []
    for name, parent, offset in _SEGMENTS:
        offset = np.asarray(offset) * (1.0 + 0.02 * rng.uniform(-1.0, 1.0))
        axes = "zxy" if dofs == 66 else _REDUCED[name]
        limit = None if dofs == 66 else _LIMITS[name]
        vel = None if dofs == 66 else _VEL_LIMIT
        chain_parent = parent
        for k, ax in enumerate(axes):
            last = k == len(axes) - 1
            child = name if last else f"{name}_{ax}"
            if not last:
                links.append(Link(child, is_dummy=True))
            else:
                links.append(Link(child))
            joints.append(Joint(
                name=f"{name}_{ax}",
                parent=chain_parent,
                child=child,
                axis=np.asarray(_AXES[ax]),
                origin_xyz=offset if k == 0 else np.zeros(3),
                origin_rpy=np.zeros(3),
                pos_limits=(-limit, limit) if limit is not None else None,
                vel_limit=vel,
            ))
            chain_parent = child
    extra = None
    if dofs == 48:
        # one coupled row over the first spine triplet; its bound sits outside
        # the reach of the individual limits, so it exercises the constraint
        # path without ever binding
        n = len(joints)
        jidx = {j.name: i for i, j in enumerate(joints)}
        row = np.zeros(n)
        row[jidx["l5_z"]] = 1.0
        row[jidx["l5_y"]] = 1.0
        extra = ExtraConstraints(a=row.reshape(1, -1),
                                 b_q=np.array([0.9]),
                                 b_nu=np.array([np.inf]))
    physical = ("pelvis",) + tuple(name for name, _, _ in _SEGMENTS)
    return KinematicModel(
        links=links,
        joints=joints,
        base_link="pelvis",
        position_targets=("pelvis",),
        orientation_targets=physical,
        extra_constraints=extra,
    )
