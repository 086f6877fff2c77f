"""HTTP facade for the interactive layer-by-layer design workflow.

Projects live in a directory tree of the same file formats the CLI
consumes (images/, markers/, arch.json), so any project is reproducible
with `flim train` on that directory.  Training is synchronous; layers
must be trained in order and become stale when markers, images or the
architecture change beneath them.
"""

from __future__ import annotations

import base64
import io
import json
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import imgcore, pngio
from .decoder import adapt_weights, decode
from .encoder import (
    ArchitectureSpec,
    FlimModel,
    count_flops,
    count_params,
    run_layer,
    _train_single_layer,
)
from .modelio import model_to_bytes

UNTRAINED = "untrained"
TRAINED = "trained"
STALE = "stale"


@dataclass
class Project:
    id: str
    dir: str
    arch: ArchitectureSpec = None
    seed: int = 0
    layers: list = field(default_factory=list)  # TrainedLayer per trained layer
    status: list = field(default_factory=list)  # per arch layer
    features: dict = field(default_factory=dict)  # layer idx -> {img: ndarray}
    lock: threading.Lock = field(default_factory=threading.Lock)

    def image_names(self):
        d = os.path.join(self.dir, "images")
        return sorted(os.listdir(d)) if os.path.isdir(d) else []

    def marker_path(self, name):
        return os.path.join(self.dir, "markers", name)

    def image_path(self, name):
        return os.path.join(self.dir, "images", name)

    def invalidate_from(self, layer_index: int):
        for li in range(layer_index, len(self.status)):
            if self.status[li] == TRAINED:
                self.status[li] = STALE
        for li in list(self.features):
            if li >= layer_index:
                del self.features[li]


def _decode_png_gray(body: bytes) -> np.ndarray:
    from PIL import Image as PILImage

    try:
        with PILImage.open(io.BytesIO(body)) as im:
            if im.mode != "L":
                im = im.convert("L")
            return np.asarray(im).copy()
    except Exception as exc:
        raise HTTPException(422, f"unreadable PNG: {exc}") from exc


def create_app(root_dir: str) -> FastAPI:
    os.makedirs(root_dir, exist_ok=True)
    app = FastAPI(title="flim marker studio service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    projects: dict[str, Project] = {}

    def get_project(pid: str) -> Project:
        proj = projects.get(pid)
        if proj is None:
            raise HTTPException(404, f"unknown project {pid}")
        return proj

    def load_training_inputs(proj: Project):
        names = proj.image_names()
        if not names:
            raise HTTPException(409, "project has no images")
        imgs, marker_sets = [], []
        for name in names:
            if not os.path.exists(proj.marker_path(name)):
                raise HTTPException(409, f"image {name} has no markers")
            imgs.append(pngio.load_image(proj.image_path(name)))
            label = pngio.load_gray(proj.marker_path(name))
            marker_sets.append(imgcore.markers_from_label_image(label, image_id=name))
        return names, imgs, marker_sets

    def build_model(proj: Project) -> FlimModel:
        names = proj.image_names()
        return FlimModel(
            arch=proj.arch,
            layers=list(proj.layers),
            seed=proj.seed,
            provenance={"images": names, "markers": names},
        )

    @app.post("/projects")
    def create_project():
        pid = uuid.uuid4().hex[:12]
        pdir = os.path.join(root_dir, pid)
        os.makedirs(os.path.join(pdir, "images"))
        os.makedirs(os.path.join(pdir, "markers"))
        projects[pid] = Project(id=pid, dir=pdir)
        return {"id": pid}

    @app.post("/projects/{pid}/images")
    async def upload_image(pid: str, request: Request, name: str = Query(...)):
        proj = get_project(pid)
        body = await request.body()
        _decode_png_gray(body)  # validates it is a PNG
        if not name.lower().endswith(".png"):
            raise HTTPException(422, "image name must end in .png")
        with proj.lock:
            with open(proj.image_path(name), "wb") as fh:
                fh.write(body)
            proj.invalidate_from(0)
        return {"name": name}

    @app.put("/projects/{pid}/images/{img}/markers")
    async def put_markers(pid: str, img: str, request: Request):
        proj = get_project(pid)
        if not os.path.exists(proj.image_path(img)):
            raise HTTPException(404, f"unknown image {img}")
        body = await request.body()
        label = _decode_png_gray(body)
        shape = pngio.load_image(proj.image_path(img)).shape[:2]
        if label.shape != shape:
            raise HTTPException(422, "marker dims differ from image dims")
        if label.max(initial=0) > imgcore.MARKER_OBJECT:
            raise HTTPException(422, "marker values must be 0, 1 or 2")
        with proj.lock:
            with open(proj.marker_path(img), "wb") as fh:
                fh.write(body)
            proj.invalidate_from(0)
        return {"name": img}

    @app.put("/projects/{pid}/arch")
    async def put_arch(pid: str, request: Request):
        proj = get_project(pid)
        try:
            arch = ArchitectureSpec.from_json(json.loads(await request.body()))
        except Exception as exc:
            raise HTTPException(422, f"bad architecture: {exc}") from exc
        with proj.lock:
            first_changed = 0
            if proj.arch is not None:
                old = [l.to_json() for l in proj.arch.layers]
                new = [l.to_json() for l in arch.layers]
                first_changed = len(old)
                for i, (a, b) in enumerate(zip(old, new)):
                    if a != b:
                        first_changed = i
                        break
                first_changed = min(first_changed, len(new))
            proj.arch = arch
            old_status = proj.status
            proj.status = [
                old_status[i] if i < min(first_changed, len(old_status)) else UNTRAINED
                for i in range(len(arch.layers))
            ]
            proj.layers = proj.layers[:first_changed]
            proj.invalidate_from(first_changed)
            with open(os.path.join(proj.dir, "arch.json"), "w") as fh:
                json.dump(arch.to_json(), fh, indent=2)
        return {"layers": len(arch.layers)}

    def compute_features(proj: Project, upto: int, names, imgs):
        """Features of every image after layer `upto` (cached)."""
        feats = {name: img for name, img in zip(names, imgs)}
        for li in range(upto + 1):
            if li in proj.features:
                feats = proj.features[li]
                continue
            feats = {
                name: run_layer(feat, proj.layers[li]) for name, feat in feats.items()
            }
            proj.features[li] = feats
        return feats

    @app.post("/projects/{pid}/layers/{layer}/train")
    async def train_layer(pid: str, layer: int, request: Request):
        proj = get_project(pid)
        body = await request.body()
        payload = json.loads(body) if body else {}
        seed = int(payload.get("seed", 0))
        simplify_n = int(payload.get("simplify_n", 0))
        with proj.lock:
            if proj.arch is None:
                raise HTTPException(409, "no architecture configured")
            if not (0 <= layer < len(proj.arch.layers)):
                raise HTTPException(404, f"layer {layer} out of range")
            for li in range(layer):
                if proj.status[li] != TRAINED:
                    raise HTTPException(
                        409, f"layer {li} is {proj.status[li]}; train layers in order"
                    )
            names, imgs, marker_sets = load_training_inputs(proj)
            if layer == 0:
                proj.seed = seed
            params_before = count_params(proj.layers)
            flops_before = count_flops(proj.layers, imgs[0].shape[:2]) if proj.layers else 0
            feats_map = (
                compute_features(proj, layer - 1, names, imgs)
                if layer > 0
                else {name: img for name, img in zip(names, imgs)}
            )
            stride = 1
            for spec in proj.arch.layers[:layer]:
                stride *= spec.pool_stride
            markers = [
                imgcore.project_markers(ms, stride) for ms in marker_sets
            ]
            feats = [feats_map[name] for name in names]
            trained = _train_single_layer(
                feats, markers, proj.arch.layers[layer], seed, layer, simplify_n
            )
            proj.layers = proj.layers[:layer] + [trained]
            proj.invalidate_from(layer)  # downstream goes stale, cache drops
            proj.status[layer] = TRAINED
            compute_features(proj, layer, names, imgs)
            params_after = count_params(proj.layers)
            flops_after = count_flops(proj.layers, imgs[0].shape[:2])
        return {
            "layer": layer,
            "kernels": trained.bank.m,
            "params": params_after,
            "flops": flops_after,
            "params_delta": params_after - params_before,
            "flops_delta": flops_after - flops_before,
        }

    def require_trained(proj: Project, layer: int):
        if proj.arch is None or not (0 <= layer < len(proj.arch.layers)):
            raise HTTPException(404, f"layer {layer} out of range")
        if proj.status[layer] != TRAINED:
            raise HTTPException(409, f"layer {layer} is {proj.status[layer]}")

    @app.get("/projects/{pid}/layers/{layer}/activations/{img}")
    def get_activation(pid: str, layer: int, img: str, channel: int = 0):
        proj = get_project(pid)
        with proj.lock:
            require_trained(proj, layer)
            if not os.path.exists(proj.image_path(img)):
                raise HTTPException(404, f"unknown image {img}")
            names, imgs, _ = load_training_inputs(proj)
            feats = compute_features(proj, layer, names, imgs)
            feat = feats[img]
            if not (0 <= channel < feat.shape[2]):
                raise HTTPException(404, f"channel {channel} out of range")
            png = pngio.channel_to_png_bytes(feat[:, :, channel])
        return Response(content=png, media_type="image/png")

    @app.get("/projects/{pid}/decode/{img}")
    def get_decode(pid: str, img: str, layer: int = -1):
        proj = get_project(pid)
        with proj.lock:
            if proj.arch is None:
                raise HTTPException(409, "no architecture configured")
            if layer < 0:
                layer += len(proj.layers) if proj.layers else len(proj.arch.layers)
            require_trained(proj, layer)
            if not os.path.exists(proj.image_path(img)):
                raise HTTPException(404, f"unknown image {img}")
            names, imgs, _ = load_training_inputs(proj)
            feats = compute_features(proj, layer, names, imgs)
            weights = adapt_weights(feats[img])
            sal = decode(feats[img], weights)
            original = imgs[names.index(img)]
            sal = imgcore.upsample_bilinear(sal, original.shape[0], original.shape[1])
            png = pngio.saliency_to_png_bytes(sal)
        return {
            "weights": weights.to_json(),
            "saliency_png": base64.b64encode(png).decode(),
        }

    @app.get("/projects/{pid}/export")
    def export_model(pid: str):
        proj = get_project(pid)
        with proj.lock:
            if proj.arch is None:
                raise HTTPException(409, "no architecture configured")
            if any(s != TRAINED for s in proj.status):
                raise HTTPException(409, "not all layers are trained")
            blob = model_to_bytes(build_model(proj))
        return Response(content=blob, media_type="application/octet-stream")

    @app.get("/projects/{pid}")
    def project_state(pid: str):
        proj = get_project(pid)
        return {
            "id": proj.id,
            "images": proj.image_names(),
            "markers": [
                n for n in proj.image_names() if os.path.exists(proj.marker_path(n))
            ],
            "arch": proj.arch.to_json() if proj.arch else None,
            "status": list(proj.status),
        }

    return app


def main():
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="flim marker studio service")
    parser.add_argument("--root", default="./flim-projects")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    uvicorn.run(create_app(args.root), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
