# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Procedural panorama rooms.

A room is a vertical cylinder of radius 1 around the camera with a floor and a
ceiling plane. Colours are smooth functions of the world ray direction, so two
views agree wherever they look in the same direction.
"""

import logging
import math
import pathlib
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Union

import torch

from mvconsist.config import (
    OBJECT_COLORS,
    OBJECT_KINDS,
    PROMPT_TOKENS_PER_VIEW,
)
from mvconsist.errors import MVConsistConfigError
from mvconsist.geometry import ViewSet, make_view_ring, ray_directions
from mvconsist.utils import make_generator, progress, require_artifact

FLOOR_LEVEL = 0.6
"""Height of the floor plane below the camera (``y`` points down)."""

CEILING_LEVEL = -0.9
"""Height of the ceiling plane above the camera."""

EDGE_SOFTNESS = 0.03
"""Width of the sigmoid transitions between surfaces and objects."""

PALETTE = {
    "red": (0.85, 0.2, 0.15),
    "green": (0.2, 0.7, 0.25),
    "blue": (0.15, 0.3, 0.85),
    "yellow": (0.9, 0.8, 0.2),
}


@dataclass(frozen=True)
class PlacedObject:
    """Primitive object on the wall."""

    kind: str
    color: str
    azimuth: float
    height: float
    half_width: float
    half_height: float

    @property
    def attribute_id(self) -> int:
        """Prompt token id of the object; ``0`` is reserved for the empty room."""
        kind = OBJECT_KINDS.index(self.kind)
        return 1 + kind * len(OBJECT_COLORS) + OBJECT_COLORS.index(self.color)


@dataclass(frozen=True)
class SceneLayout:
    """World description of one room."""

    wall_color: tuple
    wall_variation: float
    wall_phase: float
    floor_color: tuple
    floor_frequency: float
    objects: tuple = ()

    def to_dict(self) -> Dict:
        """Serialize the layout."""
        data = asdict(self)
        data["objects"] = [asdict(placed) for placed in self.objects]
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "SceneLayout":
        """Inverse of :meth:`to_dict`."""
        values = dict(data)
        values["wall_color"] = tuple(values["wall_color"])
        values["floor_color"] = tuple(values["floor_color"])
        values["objects"] = tuple(PlacedObject(**placed) for placed in data["objects"])
        return cls(**values)


@dataclass
class SyntheticScene:
    """Rendered views of one room with their prompts and depth."""

    scene_id: int
    layout: SceneLayout
    images: torch.Tensor
    depth: torch.Tensor
    prompts: torch.Tensor


@dataclass
class SceneDataset:
    """Scenes rendered on one camera ring, split by scene id."""

    view_set: ViewSet
    scenes: List[SyntheticScene]
    train_ids: List[int]
    eval_ids: List[int]
    config_hash: str = ""
    metadata: Dict = field(default_factory=dict)

    def single_view_tensors(self, ids=None):
        """All views of the given scenes as independent images.

        :return: ``(images (M, 3, H, W), prompts (M, P))``.
        """
        ids = self.train_ids if ids is None else ids
        images = torch.cat([self.scenes[i].images for i in ids])
        prompts = torch.cat([self.scenes[i].prompts for i in ids])
        return images, prompts

    def save(self, path: Union[str, pathlib.Path]) -> None:
        """Write the dataset with ``torch.save``."""
        torch.save(
            {
                "view_set": self.view_set.to_dict(),
                "scenes": [
                    {
                        "scene_id": scene.scene_id,
                        "layout": scene.layout.to_dict(),
                        "images": scene.images,
                        "depth": scene.depth,
                        "prompts": scene.prompts,
                    }
                    for scene in self.scenes
                ],
                "train_ids": self.train_ids,
                "eval_ids": self.eval_ids,
                "config_hash": self.config_hash,
                "metadata": self.metadata,
            },
            path,
        )
        logging.info(f"Wrote {len(self.scenes)} scenes to {path}.")

    @classmethod
    def load(cls, path: Union[str, pathlib.Path]) -> "SceneDataset":
        """Read a dataset written by :meth:`save`."""
        data = torch.load(path)
        return cls(
            view_set=make_view_ring(**data["view_set"]),
            scenes=[
                SyntheticScene(
                    scene_id=scene["scene_id"],
                    layout=SceneLayout.from_dict(scene["layout"]),
                    images=scene["images"],
                    depth=scene["depth"],
                    prompts=scene["prompts"],
                )
                for scene in data["scenes"]
            ],
            train_ids=list(data["train_ids"]),
            eval_ids=list(data["eval_ids"]),
            config_hash=data["config_hash"],
            metadata=data.get("metadata", {}),
        )


def _wrap_angle(angle: torch.Tensor) -> torch.Tensor:
    return torch.remainder(angle + math.pi, 2.0 * math.pi) - math.pi


def _soft_inside(distance: torch.Tensor) -> torch.Tensor:
    """Smooth indicator of ``distance < 0``."""
    return torch.sigmoid(-distance / EDGE_SOFTNESS)


def _object_coverage(placed: PlacedObject, azimuth, wall_height) -> torch.Tensor:
    d_az = _wrap_angle(azimuth - placed.azimuth).abs() / placed.half_width
    d_h = (wall_height - placed.height).abs() / placed.half_height
    if placed.kind == "lamp":
        distance = torch.sqrt(d_az**2 + d_h**2) - 1.0
    else:
        distance = torch.maximum(d_az, d_h) - 1.0
    coverage = _soft_inside(distance)
    if placed.kind == "window":
        # Frame bars darken a cross through the window.
        bars = _soft_inside(torch.minimum(d_az, d_h) - 0.08)
        coverage = coverage * (1.0 - 0.6 * bars)
    return coverage


def render_directions(layout: SceneLayout, directions: torch.Tensor):
    """Colour and depth seen along world rays.

    :param directions: ``(..., 3)`` world ray directions, any length.
    :return: ``(colors (..., 3), depth (...))`` in float64.
    """
    directions = directions.to(torch.float64)
    unit = directions / torch.linalg.vector_norm(directions, dim=-1, keepdim=True)
    horizontal = torch.sqrt(unit[..., 0] ** 2 + unit[..., 2] ** 2).clamp_min(1e-9)
    azimuth = torch.atan2(unit[..., 0], unit[..., 2])
    wall_height = unit[..., 1] / horizontal

    wall_color = torch.tensor(layout.wall_color, dtype=torch.float64)
    shade = 1.0 + layout.wall_variation * torch.sin(azimuth + layout.wall_phase)
    color = wall_color * shade[..., None]
    for placed in layout.objects:
        coverage = _object_coverage(placed, azimuth, wall_height)[..., None]
        object_color = torch.tensor(PALETTE[placed.color], dtype=torch.float64)
        color = (1.0 - coverage) * color + coverage * object_color

    floor_distance = FLOOR_LEVEL / unit[..., 1].clamp_min(1e-9)
    floor_x = unit[..., 0] * floor_distance
    floor_z = unit[..., 2] * floor_distance
    texture = 0.5 + 0.5 * torch.sin(layout.floor_frequency * floor_x) * torch.sin(
        layout.floor_frequency * floor_z
    )
    floor_color = torch.tensor(layout.floor_color, dtype=torch.float64)
    floor_color = floor_color * (0.7 + 0.3 * texture[..., None])
    on_floor = _soft_inside(FLOOR_LEVEL - wall_height)[..., None]
    color = (1.0 - on_floor) * color + on_floor * floor_color
    on_ceiling = _soft_inside(wall_height - CEILING_LEVEL)[..., None]
    color = (1.0 - on_ceiling) * color + on_ceiling * 0.9

    depth = 1.0 / horizontal
    depth = torch.where(wall_height > FLOOR_LEVEL, floor_distance, depth)
    ceiling_distance = CEILING_LEVEL / unit[..., 1].clamp_max(-1e-9)
    depth = torch.where(wall_height < CEILING_LEVEL, ceiling_distance, depth)
    return color.clamp(0.0, 1.0), depth


def render_views(layout: SceneLayout, view_set: ViewSet):
    """Render every view of the ring.

    :return: ``(images (N, 3, H, W), depth (N, H, W))`` in float32.
    """
    images, depths = [], []
    for i in range(view_set.n_views):
        color, depth = render_directions(layout, ray_directions(view_set, i))
        images.append(color.permute(2, 0, 1).to(torch.float32))
        depths.append(depth.to(torch.float32))
    return torch.stack(images), torch.stack(depths)


def visible_prompts(layout: SceneLayout, view_set: ViewSet) -> torch.Tensor:
    """Prompt ids of the objects whose center each view sees, padded with ``0``.

    :return: ``(N, PROMPT_TOKENS_PER_VIEW)`` long tensor.
    """
    half_fov = math.radians(view_set.fov_deg) / 2.0
    rows = []
    for i in range(view_set.n_views):
        yaw = math.radians(view_set.yaw_deg(i))
        ids = sorted(
            placed.attribute_id
            for placed in layout.objects
            if abs(math.remainder(placed.azimuth - yaw, 2.0 * math.pi)) < half_fov
        )[:PROMPT_TOKENS_PER_VIEW]
        rows.append(ids + [0] * (PROMPT_TOKENS_PER_VIEW - len(ids)))
    return torch.tensor(rows, dtype=torch.long)


def sample_layout(scene_id: int, seed: int, max_objects: int) -> SceneLayout:
    """Draw the layout of scene ``scene_id``.

    The first object of scene ``s`` has kind ``s mod K`` and colour
    ``(s div K) mod C``, so any ``K * C`` consecutive scenes use every prompt id.
    """
    if max_objects < 1:
        raise MVConsistConfigError(
            f"Scenes need at least one object, got {max_objects}."
        )
    generator = make_generator(seed, "scene", scene_id)

    def uniform(low, high, size=()):
        draw = torch.rand(size, generator=generator, dtype=torch.float64)
        return low + (high - low) * draw

    n_objects = int(torch.randint(1, max_objects + 1, (), generator=generator))
    objects = []
    for k in range(n_objects):
        objects.append(
            PlacedObject(
                kind=OBJECT_KINDS[(scene_id + k) % len(OBJECT_KINDS)],
                color=OBJECT_COLORS[
                    (scene_id // len(OBJECT_KINDS) + k) % len(OBJECT_COLORS)
                ],
                azimuth=float(uniform(-math.pi, math.pi)),
                height=float(uniform(-0.3, 0.2)),
                half_width=float(uniform(0.2, 0.45)),
                half_height=float(uniform(0.15, 0.3)),
            )
        )
    return SceneLayout(
        wall_color=tuple(float(v) for v in uniform(0.35, 0.75, (3,))),
        wall_variation=float(uniform(0.05, 0.25)),
        wall_phase=float(uniform(0.0, 2.0 * math.pi)),
        floor_color=tuple(float(v) for v in uniform(0.2, 0.6, (3,))),
        floor_frequency=float(uniform(2.0, 8.0)),
        objects=tuple(objects),
    )


def split_ids(n_scenes: int, eval_fraction: float):
    """Split scene ids into training and evaluation ids.

    The last ``round(n * eval_fraction)`` scenes are held out, keeping at least
    one training scene; a single scene is used for both.
    """
    if n_scenes < 1:
        raise MVConsistConfigError(f"Need at least one scene, got {n_scenes}.")
    if n_scenes == 1:
        return [0], [0]
    n_eval = min(max(round(n_scenes * eval_fraction), 1), n_scenes - 1)
    ids = list(range(n_scenes))
    return ids[: n_scenes - n_eval], ids[n_scenes - n_eval :]


def generate_dataset(
    view_set: ViewSet,
    n_scenes: int,
    seed: int,
    max_objects: int = 3,
    eval_fraction: float = 0.25,
    config_hash: str = "",
) -> SceneDataset:
    """Render ``n_scenes`` rooms on ``view_set``; deterministic under ``seed``."""
    scenes = []
    for scene_id in progress(range(n_scenes), desc="scenes"):
        layout = sample_layout(scene_id, seed, max_objects)
        images, depth = render_views(layout, view_set)
        scenes.append(
            SyntheticScene(
                scene_id=scene_id,
                layout=layout,
                images=images,
                depth=depth,
                prompts=visible_prompts(layout, view_set),
            )
        )
    train_ids, eval_ids = split_ids(n_scenes, eval_fraction)
    logging.info(
        f"Generated {n_scenes} scenes ({len(train_ids)} train, {len(eval_ids)} eval)."
    )
    return SceneDataset(
        view_set=view_set,
        scenes=scenes,
        train_ids=train_ids,
        eval_ids=eval_ids,
        config_hash=config_hash,
    )


def load_dataset(path: pathlib.Path) -> SceneDataset:
    """Load a dataset, failing with the subcommand that creates it."""
    require_artifact(path, "gen-data")
    return SceneDataset.load(path)
