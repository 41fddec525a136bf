"""Synthetic benchmarks: object cutting and pick-and-place."""

from .cutting import PolygonScene, eval_cut_success, gen_polygon, plan_cutting, rasterize
from .pickplace import PickPlaceScene, eval_pickplace, gen_pickplace, plan_pickplace

__all__ = [
    "PickPlaceScene", "PolygonScene", "eval_cut_success", "eval_pickplace", "gen_pickplace",
    "gen_polygon", "plan_cutting", "plan_pickplace", "rasterize",
]
