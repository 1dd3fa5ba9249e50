"""Socket-protocol tests against a headless server instance."""
import asyncio
import base64
import json
import math

import pytest

from gennav.sim import PlantConfig
from gennav.server import serve_async
from gennav.world import grid_geometry_for, load_builtin_world

jsonschema = pytest.importorskip("jsonschema")

PORT = 8931

TELEMETRY_SCHEMA = {
    "type": "object",
    "required": ["type", "tick", "mode", "pose_true", "pose_est", "battery_v"],
    "properties": {
        "type": {"const": "telemetry"},
        "tick": {"type": "integer", "minimum": 0},
        "mode": {"enum": ["IDLE", "MAPPING", "PLANNING", "EXECUTING",
                          "RECOVERY", "GOAL_REACHED", "ABORTED"]},
        "pose_true": {"type": "array", "minItems": 3, "maxItems": 3,
                      "items": {"type": "number"}},
        "pose_est": {"type": "array", "minItems": 3, "maxItems": 3,
                     "items": {"type": "number"}},
        "battery_v": {"type": "number", "exclusiveMinimum": 0},
        "particles": {"type": "array",
                      "items": {"type": "array", "minItems": 4, "maxItems": 4,
                                "items": {"type": "number"}}},
        "path": {"type": "array",
                 "items": {"type": "array", "minItems": 2, "maxItems": 2,
                           "items": {"type": "number"}}},
        "scan": {"type": "object",
                 "required": ["angle_min", "angle_increment", "range_max", "ranges"],
                 "properties": {"ranges": {"type": "array",
                                           "items": {"type": "number"}}}},
        "map_patch": {"type": "object",
                      "required": ["resolution", "origin", "width", "height", "data"],
                      "properties": {"width": {"type": "integer"},
                                     "height": {"type": "integer"},
                                     "data": {"type": "string"}}},
    },
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["type", "msg"],
    "properties": {"type": {"const": "error"}, "msg": {"type": "string"}},
}


async def _with_server(run_client, map_grid=None, port=PORT):
    world = load_builtin_world()
    if map_grid is None:
        origin, w, h = grid_geometry_for(world, 0.05)
        map_grid = world.rasterize(0.05, origin, w, h)
    ready = asyncio.Event()
    task = asyncio.create_task(serve_async(
        world, map_grid, PlantConfig(), port, seed=0, headless=True,
        realtime=False, ready=ready))
    try:
        await asyncio.wait_for(ready.wait(), 20)
        from websockets.asyncio.client import connect

        async with connect(f"ws://127.0.0.1:{port}", max_size=None) as ws:
            await asyncio.wait_for(run_client(ws), 90)
    finally:
        task.cancel()
        try:
            await task
        except (asyncio.CancelledError, Exception):
            pass


def run(coro_factory, **kw):
    asyncio.run(_with_server(coro_factory, **kw))


async def recv_json(ws):
    return json.loads(await ws.recv())


async def recv_until(ws, predicate, limit=600):
    for _ in range(limit):
        msg = await recv_json(ws)
        if predicate(msg):
            return msg
    raise AssertionError("expected frame never arrived")


class TestTelemetry:
    def test_frames_validate_against_schema(self):
        async def client(ws):
            for _ in range(30):
                msg = await recv_json(ws)
                if msg["type"] == "telemetry":
                    jsonschema.validate(msg, TELEMETRY_SCHEMA)
                else:
                    jsonschema.validate(msg, ERROR_SCHEMA)

        run(client)

    def test_map_patch_round_trips(self):
        async def client(ws):
            msg = await recv_until(ws, lambda m: "map_patch" in m)
            patch = msg["map_patch"]
            raw = base64.b64decode(patch["data"])
            assert len(raw) == patch["width"] * patch["height"]

        run(client)


class TestCommands:
    def test_malformed_json_gets_error_and_survives(self):
        async def client(ws):
            await ws.send("{not json")
            msg = await recv_until(ws, lambda m: m["type"] == "error")
            jsonschema.validate(msg, ERROR_SCHEMA)
            # connection still works: telemetry keeps flowing
            msg = await recv_until(ws, lambda m: m["type"] == "telemetry")
            assert msg["tick"] >= 0

        run(client)

    def test_unknown_type_gets_error(self):
        async def client(ws):
            await ws.send(json.dumps({"type": "hyperdrive"}))
            msg = await recv_until(ws, lambda m: m["type"] == "error")
            assert "hyperdrive" in msg["msg"]

        run(client)

    def test_goal_on_obstacle_rejected(self):
        async def client(ws):
            await ws.send(json.dumps({"type": "goal", "pose": [3.5, 3.5, 0.0]}))
            msg = await recv_until(ws, lambda m: m["type"] == "error")
            assert "obstacle" in msg["msg"]

        run(client)

    def test_goal_accepted_reaches_executing(self):
        async def client(ws):
            await ws.send(json.dumps({"type": "goal", "pose": [5.0, 1.5, 0.0]}))
            msg = await recv_until(
                ws, lambda m: m["type"] == "telemetry" and m["mode"] == "EXECUTING")
            assert msg.get("path"), "path should be published while executing"

        run(client)

    def test_mapping_teleop_round_trip(self, tmp_path):
        async def client(ws):
            await ws.send(json.dumps({"type": "set_mode", "mode": "MAPPING"}))
            await recv_until(
                ws, lambda m: m["type"] == "telemetry" and m["mode"] == "MAPPING")
            await ws.send(json.dumps({"type": "teleop", "twist": [0.3, 0.0, 0.0]}))
            start = await recv_until(
                ws, lambda m: m["type"] == "telemetry" and m["mode"] == "MAPPING")
            moved = await recv_until(
                ws, lambda m: m["type"] == "telemetry"
                and m["pose_true"][0] > start["pose_true"][0] + 0.05)
            # a mapping-mode map patch eventually arrives
            await recv_until(ws, lambda m: "map_patch" in m)
            out = tmp_path / "teleop_map"
            await ws.send(json.dumps({"type": "save_map", "path": str(out)}))
            await ws.send(json.dumps({"type": "teleop", "twist": [0.0, 0.0, 0.0]}))
            for _ in range(200):
                if out.with_suffix(".pgm").exists():
                    break
                await recv_json(ws)
            assert out.with_suffix(".pgm").exists()
            assert out.with_suffix(".yaml").exists()

        run(client, map_grid=None)
