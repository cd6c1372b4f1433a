"""Procedural stand-in for the underwater rendering workflow."""

from .render import (
    FOG_COLORS, FOG_SCALE, CameraPose, FogParams, GBuffer, LightConfig, RenderedFrame, apply_fog,
    cast_rays, raycast_view, render_stereo_frame, shade, visible_from_right,
)
from .scene import SCENE_KINDS, Scene, SceneError, SceneObject, Texture, build_scene
from .sequence import (
    SequenceConfig, SequenceError, SequenceRun, camera_trajectory, export_sequence, frame_id,
    generate_sequence, merge_manifests,
)
