"""Telemetry and teleoperation server.

One WebSocket endpoint speaks JSON text frames, one object per frame:

  server -> client
    {"type": "telemetry", "tick": int, "mode": str,
     "pose_true": [x, y, t], "pose_est": [x, y, t], "battery_v": float,
     "particles": [[x, y, t, w], ...]?, "path": [[x, y], ...]?,
     "scan": {...}?, "map_patch": {...}?}
    {"type": "error", "msg": str}

  client -> server
    {"type": "teleop", "twist": [vx, vy, w]}
    {"type": "goal", "pose": [x, y, t]}
    {"type": "set_mode", "mode": "MAPPING" | "IDLE"}
    {"type": "save_map", "path": str}

Unknown types and malformed JSON produce an error frame and leave the
connection open. Client commands are queued and consumed at tick
boundaries; the simulation loop is the only writer of stack state.
The same port serves the static browser UI over plain HTTP.
"""
from __future__ import annotations

import asyncio
import base64
import json
import math
from pathlib import Path

import numpy as np

from .control import ActuationController
from .errors import GennavError
from .geometry import OccupancyGrid, Pose2D, Twist2D
from .map_io import save_map
from .mapping import GridMapper, MapperConfig
from .navigator import NavConfig, NavMode, Navigator
from .runner import CONTROL_DT, make_simulator
from .sim import PlantConfig
from .world import World, grid_geometry_for

PARTICLE_BUDGET = 100   # particles per telemetry frame
SCAN_DECIMATION = 2

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".svg": "image/svg+xml",
}


def map_patch_payload(grid: OccupancyGrid) -> dict:
    """Full-grid probability raster, row-major bytes in base64."""
    probs = np.round(grid.probabilities() * 255).astype(np.uint8)
    return {
        "resolution": grid.resolution,
        "origin": [grid.origin.x, grid.origin.y, grid.origin.theta],
        "width": grid.width,
        "height": grid.height,
        "data": base64.b64encode(probs.tobytes()).decode("ascii"),
    }


class NavServer:
    """Owns the simulator and stack; clients only exchange JSON frames."""

    def __init__(self, world: World, map_grid: OccupancyGrid | None,
                 plant: PlantConfig, seed: int = 0, spawn: str | None = None,
                 realtime: bool = True, static_dir: Path | None = None):
        self.world = world
        self.plant = plant
        self.realtime = realtime
        self.static_dir = static_dir
        self.sim = make_simulator(world, plant, seed)
        start = world.spawn(spawn) if spawn else self._default_spawn()
        self.state = self.sim.initial_state(start)
        self.navigator = Navigator(plant, NavConfig(), map_grid=map_grid,
                                   seed=seed + 1)
        if map_grid is not None:
            self.navigator.initialize_at(start)
        self.controller = ActuationController(plant)
        self.seed = seed
        self.sim_t = 0.0
        self.clients: set = set()
        self.commands: asyncio.Queue = asyncio.Queue()
        self._map_version_sent: dict = {}
        self._map_version = 0 if map_grid is None else 1
        self._stop = asyncio.Event()
        self._last_scan = None

    def _default_spawn(self) -> Pose2D:
        if "start" in self.world.spawns:
            return self.world.spawn("start")
        xmin, ymin, xmax, ymax = self.world.bounds()
        return Pose2D((xmin + xmax) / 2, (ymin + ymax) / 2, 0.0)

    # -- tick loop -------------------------------------------------------------

    async def run(self) -> None:
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while not self._stop.is_set():
            await self._drain_commands()
            self._tick()
            await self._broadcast(self._telemetry_frame())
            next_tick += CONTROL_DT
            if self.realtime:
                await asyncio.sleep(max(next_tick - loop.time(), 0.0))
            else:
                await asyncio.sleep(0)

    def stop(self) -> None:
        self._stop.set()

    def _tick(self) -> None:
        scan = self.sim.scan(self.state, self.sim_t)
        self._last_scan = scan
        cmd = self.navigator.tick(scan, CONTROL_DT)
        duties = self.controller.step(cmd, self.navigator.odom_twist,
                                      self.state.battery.v_now, CONTROL_DT)
        self.state = self.sim.step(self.state, duties, CONTROL_DT)
        self.sim_t += CONTROL_DT

    # -- frames ------------------------------------------------------------------

    def _telemetry_frame(self) -> str:
        nav = self.navigator
        frame: dict = {
            "type": "telemetry",
            "tick": nav.tick_count,
            "mode": nav.mode.value,
            "pose_true": [self.state.pose.x, self.state.pose.y, self.state.pose.theta],
            "pose_est": [nav.estimate.x, nav.estimate.y, nav.estimate.theta],
            "battery_v": self.state.battery.v_now,
        }
        if nav.localizer is not None and nav.localizer.initialized:
            particles = nav.localizer.particles
            step = max(1, particles.n // PARTICLE_BUDGET)
            rows = np.column_stack((particles.poses[::step],
                                    particles.weights[::step]))
            frame["particles"] = np.round(rows, 4).tolist()
        if nav.path is not None:
            frame["path"] = np.round(nav.path.waypoints, 3).tolist()
        if self._last_scan is not None:
            scan = self._last_scan
            frame["scan"] = {
                "angle_min": scan.angle_min,
                "angle_increment": scan.angle_increment * SCAN_DECIMATION,
                "range_max": scan.range_max,
                "ranges": np.round(scan.ranges[::SCAN_DECIMATION], 3).tolist(),
            }
        return json.dumps(frame)

    def _current_map(self) -> OccupancyGrid | None:
        if self.navigator.mode is NavMode.MAPPING and self.navigator.mapper:
            return self.navigator.mapper.best_map()
        return self.navigator.map

    async def _broadcast(self, text: str) -> None:
        if not self.clients:
            return
        stale = []
        for client in self.clients:
            try:
                await client.send(text)
                await self._send_map_if_new(client)
            except Exception:
                stale.append(client)
        for client in stale:
            self.clients.discard(client)

    async def _send_map_if_new(self, client) -> None:
        if self.navigator.mode is NavMode.MAPPING and self.navigator.mapper:
            self._map_version = self.navigator.mapper.updates
        version = self._map_version
        if self._map_version_sent.get(client) == version:
            return
        grid = self._current_map()
        if grid is None:
            return
        frame = json.dumps({"type": "telemetry", "tick": self.navigator.tick_count,
                            "mode": self.navigator.mode.value,
                            "pose_true": [self.state.pose.x, self.state.pose.y,
                                          self.state.pose.theta],
                            "pose_est": [self.navigator.estimate.x,
                                         self.navigator.estimate.y,
                                         self.navigator.estimate.theta],
                            "battery_v": self.state.battery.v_now,
                            "map_patch": map_patch_payload(grid)})
        await client.send(frame)
        self._map_version_sent[client] = version

    # -- client handling -----------------------------------------------------------

    async def handle_client(self, connection) -> None:
        self.clients.add(connection)
        try:
            async for message in connection:
                await self._receive(connection, message)
        finally:
            self.clients.discard(connection)
            self._map_version_sent.pop(connection, None)

    async def _receive(self, connection, message) -> None:
        try:
            data = json.loads(message)
            if not isinstance(data, dict) or "type" not in data:
                raise ValueError("frame must be an object with a 'type'")
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            await connection.send(json.dumps({"type": "error",
                                              "msg": f"malformed frame: {exc}"}))
            return
        if data["type"] not in ("teleop", "goal", "set_mode", "save_map"):
            await connection.send(json.dumps({"type": "error",
                                              "msg": f"unknown type {data['type']!r}"}))
            return
        await self.commands.put((connection, data))

    async def _drain_commands(self) -> None:
        while not self.commands.empty():
            connection, data = self.commands.get_nowait()
            try:
                self._apply_command(data)
            except GennavError as exc:
                await self._reply_error(connection, str(exc))
            except (KeyError, TypeError, ValueError, IndexError) as exc:
                await self._reply_error(connection, f"bad command: {exc}")

    async def _reply_error(self, connection, msg: str) -> None:
        try:
            await connection.send(json.dumps({"type": "error", "msg": msg}))
        except Exception:
            self.clients.discard(connection)

    def _apply_command(self, data: dict) -> None:
        kind = data["type"]
        if kind == "teleop":
            vx, vy, w = (float(v) for v in data["twist"])
            self.navigator.set_teleop(Twist2D(vx, vy, w))
        elif kind == "goal":
            x, y, t = (float(v) for v in data["pose"])
            self.navigator.set_goal(Pose2D(x, y, t))
        elif kind == "set_mode":
            self._set_mode(str(data["mode"]))
        elif kind == "save_map":
            grid = self._current_map()
            if grid is None:
                raise GennavError("no map to save")
            save_map(grid, data["path"])

    def _set_mode(self, mode: str) -> None:
        nav = self.navigator
        if mode == "MAPPING":
            if nav.mode is not NavMode.IDLE:
                raise GennavError(f"cannot enter MAPPING from {nav.mode.value}")
            cfg = MapperConfig()
            origin, width, height = grid_geometry_for(self.world, cfg.resolution)
            mapper = GridMapper(origin, width, height, cfg, seed=self.seed + 2,
                                start_pose=self.state.pose)
            nav.start_mapping(mapper)
        elif mode == "IDLE":
            nav.set_teleop(Twist2D())
            nav.reset()
        else:
            raise GennavError(f"unsupported mode {mode!r}")

    # -- static assets ------------------------------------------------------------

    def process_request(self, connection, request):
        """Serve the UI over plain HTTP; let WebSocket upgrades through."""
        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None
        if self.static_dir is None:
            return connection.respond(404, "headless server: WebSocket only\n")
        name = request.path.split("?")[0].lstrip("/") or "index.html"
        target = (self.static_dir / name).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) \
                or not target.is_file():
            return connection.respond(404, "not found\n")
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        body = target.read_bytes()
        headers = Headers()
        headers["Content-Type"] = _CONTENT_TYPES.get(
            target.suffix, "application/octet-stream")
        headers["Content-Length"] = str(len(body))
        headers["Connection"] = "close"
        return Response(200, "OK", headers, body)


async def serve_async(world: World, map_grid: OccupancyGrid | None,
                      plant: PlantConfig, port: int, seed: int = 0,
                      headless: bool = False, realtime: bool = True,
                      host: str = "127.0.0.1", ready: asyncio.Event | None = None):
    """Run the tick loop plus the WebSocket endpoint until cancelled."""
    from websockets.asyncio.server import serve as ws_serve

    static_dir = None
    if not headless:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        if bundled.is_dir():
            static_dir = bundled
    server = NavServer(world, map_grid, plant, seed=seed, realtime=realtime,
                       static_dir=static_dir)
    async with ws_serve(server.handle_client, host, port,
                        process_request=server.process_request):
        if ready is not None:
            ready.set()
        await server.run()


def serve(world: World, map_grid: OccupancyGrid | None, plant: PlantConfig,
          port: int, seed: int = 0, headless: bool = False) -> None:
    try:
        asyncio.run(serve_async(world, map_grid, plant, port, seed, headless))
    except KeyboardInterrupt:
        pass
