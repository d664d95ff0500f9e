"""Aerial victim detection pipeline: simulated detections, attitude and
image-center gating, closed-form pixel-to-ground projection, and multi-hit
spatial consensus.

The camera is nadir-mounted: at level attitude the optical axis points
straight down and the image axes align with the world axes (+u east,
+v south), so a pixel offset right of the principal point lands east of
the vehicle.  Projection assumes a flat ground plane at z = 0.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .worldgen import WorldSpec

VICTIM = "victim"
NON_TRAVERSABLE = "non_traversable"

MAX_EVENT_BYTES = 1024

# body <- camera: +u -> body +x, +v -> body -y, optical axis -> body -z
R_MOUNT = np.array([
    [1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
])

DEFAULT_TILT_GATE = math.radians(15.0)
DEFAULT_CENTER_FRACTION = 0.5


class NoGroundIntersection(Exception):
    """The detection ray points at or above horizontal."""


@dataclass
class CameraIntrinsics:
    focal_length_px: float = 500.0
    principal_point: tuple[float, float] = (320.0, 240.0)
    image_size: tuple[int, int] = (640, 480)

    def __post_init__(self):
        if self.focal_length_px <= 0:
            raise ValueError("focal length must be positive")
        u, v = self.principal_point
        w, h = self.image_size
        if not (0 <= u <= w and 0 <= v <= h):
            raise ValueError("principal point must lie inside the image")


@dataclass
class UavPose:
    position: np.ndarray           # (x, y, z) meters ENU; z is height above ground
    attitude: np.ndarray           # unit quaternion (w, x, y, z)
    timestamp: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.attitude = np.asarray(self.attitude, dtype=float)
        norm = float(np.linalg.norm(self.attitude))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"attitude quaternion not normalized (|q| = {norm})")


@dataclass
class RawDetection:
    bbox: tuple[float, float, float, float]   # (x0, y0, x1, y1) pixels
    class_label: str
    confidence: float
    pose: UavPose

    def contact_pixel(self) -> tuple[float, float]:
        """Bottom-edge midpoint: the assumed ground contact in pixel space."""
        x0, y0, x1, y1 = self.bbox
        return 0.5 * (x0 + x1), y1


@dataclass
class DetectionEvent:
    world_position: np.ndarray
    class_label: str
    confidence: float
    source_uav: str
    timestamp: float

    def __post_init__(self):
        self.world_position = np.asarray(self.world_position, dtype=float)


def attitude_gate(pose: UavPose, max_tilt: float = DEFAULT_TILT_GATE) -> bool:
    """Accept only near-level attitudes: |roll| and |pitch| <= max_tilt (inclusive)."""
    roll, pitch = geometry.quat_roll_pitch(pose.attitude)
    return abs(roll) <= max_tilt and abs(pitch) <= max_tilt


def center_gate(bbox, image_size, center_fraction: float = DEFAULT_CENTER_FRACTION) -> bool:
    """Accept detections whose ground-contact pixel lies in the central
    rectangle spanning `center_fraction` of each image dimension (inclusive)."""
    width, height = image_size
    u = 0.5 * (bbox[0] + bbox[2])
    v = bbox[3]
    half_u = 0.5 * center_fraction * width
    half_v = 0.5 * center_fraction * height
    return (abs(u - 0.5 * width) <= half_u) and (abs(v - 0.5 * height) <= half_v)


def _pixel_ray_world(pixel, pose: UavPose, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Unit-free ray direction in world coordinates through a pixel."""
    u, v = pixel
    f = intrinsics.focal_length_px
    cx, cy = intrinsics.principal_point
    d_cam = np.array([(u - cx) / f, (v - cy) / f, 1.0])
    r_att = geometry.quat_to_matrix(pose.attitude)
    return r_att @ (R_MOUNT @ d_cam)


def project_to_ground(detection: RawDetection, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Closed-form projection of the detection's contact pixel onto z = 0."""
    pose = detection.pose
    direction = _pixel_ray_world(detection.contact_pixel(), pose, intrinsics)
    if direction[2] >= -1e-12:
        raise NoGroundIntersection("detection ray does not descend toward the ground")
    t = -pose.position[2] / direction[2]
    point = pose.position + t * direction
    return point[:2]


def back_project(world_xy, pose: UavPose, intrinsics: CameraIntrinsics):
    """Pixel at which a ground point appears, or None when behind the camera."""
    target = np.array([world_xy[0], world_xy[1], 0.0])
    r_att = geometry.quat_to_matrix(pose.attitude)
    d_world = target - pose.position
    d_cam = R_MOUNT.T @ (r_att.T @ d_world)
    if d_cam[2] <= 1e-9:
        return None
    f = intrinsics.focal_length_px
    cx, cy = intrinsics.principal_point
    u = f * d_cam[0] / d_cam[2] + cx
    v = f * d_cam[1] / d_cam[2] + cy
    return u, v


def simulate_detection(world: WorldSpec, pose: UavPose, intrinsics: CameraIntrinsics,
                       noise_sigma: float = 0.0,
                       rng: np.random.Generator | None = None,
                       bbox_size: tuple[float, float] = (24.0, 48.0),
                       confidence: float = 0.9) -> list[RawDetection]:
    """Detection oracle replacing the onboard detector: one RawDetection per
    victim whose ground contact back-projects into the image.

    `noise_sigma` is a ground-plane standard deviation in meters, converted
    to pixel noise at the UAV's current altitude.  With a seeded rng the
    output is deterministic.
    """
    width, height = intrinsics.image_size
    detections: list[RawDetection] = []
    altitude = float(pose.position[2])
    if altitude <= 0:
        return detections
    sigma_px = noise_sigma * intrinsics.focal_length_px / altitude
    for victim in world.victims:
        pixel = back_project(victim, pose, intrinsics)
        if pixel is None:
            continue
        u, v = pixel
        if noise_sigma > 0.0:
            if rng is None:
                raise ValueError("noise_sigma > 0 requires an rng")
            u += sigma_px * rng.standard_normal()
            v += sigma_px * rng.standard_normal()
        if not (0.0 <= u <= width and 0.0 <= v <= height):
            continue
        bw, bh = bbox_size
        x0 = max(0.0, u - 0.5 * bw)
        x1 = min(float(width), u + 0.5 * bw)
        y0 = max(0.0, v - bh)
        detections.append(RawDetection((x0, y0, x1, v), VICTIM, confidence, pose))
    return detections


# ---------------------------------------------------------------------------
# Spatial consensus
# ---------------------------------------------------------------------------

@dataclass
class ConfirmedVictim:
    position: np.ndarray
    class_label: str
    hit_count: int


@dataclass
class _Cluster:
    class_label: str
    positions: list
    confirmed: bool = False

    @property
    def centroid(self) -> np.ndarray:
        return np.mean(np.asarray(self.positions), axis=0)


class ConsensusTracker:
    """Requires `required_hits` detections within `radius` of a running
    cluster centroid before confirming a victim; each cluster confirms at
    most once, at the centroid of its members.

    Hits landing within `suppression_radius` of an already confirmed victim
    are treated as re-detections of it and discarded, so measurement-noise
    stragglers beyond the consensus gate cannot seed duplicate victims."""

    def __init__(self, radius: float = 1.0, required_hits: int = 3,
                 suppression_radius: float | None = None):
        if required_hits < 1:
            raise ValueError("required_hits must be >= 1")
        self.radius = float(radius)
        self.required_hits = int(required_hits)
        self.suppression_radius = (2.0 * self.radius if suppression_radius is None
                                   else float(suppression_radius))
        self.clusters: list[_Cluster] = []

    def update(self, event: DetectionEvent) -> ConfirmedVictim | None:
        position = event.world_position
        for cluster in self.clusters:
            if cluster.confirmed and cluster.class_label == event.class_label and \
                    float(np.hypot(*(cluster.centroid - position))) <= self.suppression_radius:
                return None
        best = None
        best_dist = self.radius
        for cluster in self.clusters:
            if cluster.class_label != event.class_label:
                continue
            dist = float(np.hypot(*(cluster.centroid - position)))
            # first-seeded cluster wins distance ties (strict improvement only)
            if dist <= self.radius and (best is None or dist < best_dist):
                best = cluster
                best_dist = dist
        if best is None:
            best = _Cluster(event.class_label, [])
            self.clusters.append(best)
        best.positions.append(np.array(position, dtype=float))
        if not best.confirmed and len(best.positions) >= self.required_hits:
            best.confirmed = True
            return ConfirmedVictim(best.centroid, best.class_label, len(best.positions))
        return None


def consensus_update(tracker: ConsensusTracker, event: DetectionEvent):
    """Functional alias for ConsensusTracker.update."""
    return tracker.update(event)


# ---------------------------------------------------------------------------
# Wire format: length-prefixed JSON, < 1 kB per event
# ---------------------------------------------------------------------------

def encode_event(event: DetectionEvent) -> bytes:
    """Serialize to a 4-byte big-endian length prefix plus UTF-8 JSON with
    fields exactly {world_x, world_y, class, confidence, uav_id, t}."""
    payload = json.dumps({
        "world_x": float(event.world_position[0]),
        "world_y": float(event.world_position[1]),
        "class": event.class_label,
        "confidence": float(event.confidence),
        "uav_id": event.source_uav,
        "t": float(event.timestamp),
    }).encode("utf-8")
    message = struct.pack(">I", len(payload)) + payload
    if len(message) >= MAX_EVENT_BYTES:
        raise ValueError(f"detection event exceeds {MAX_EVENT_BYTES} bytes")
    return message


def decode_event(buffer: bytes) -> tuple[DetectionEvent, int]:
    """Parse one length-prefixed event; returns (event, bytes consumed)."""
    (length,) = struct.unpack(">I", buffer[:4])
    payload = json.loads(buffer[4:4 + length].decode("utf-8"))
    event = DetectionEvent(
        world_position=np.array([payload["world_x"], payload["world_y"]]),
        class_label=payload["class"],
        confidence=payload["confidence"],
        source_uav=payload["uav_id"],
        timestamp=payload["t"],
    )
    return event, 4 + length
