#!/usr/bin/env python3
"""Regenerate test/fixtures/budget_cases.json from the running service.

Starts the backend (uvicorn) on a scratch port, uploads a tiny dataset, and
builds one sketch per (m, p, epsilon) triple; the service's sketch
descriptor is the authority for the expected budget b. Keeping the fixture
committed lets the vitest suite assert UI/service agreement offline.
"""

import json
import random
import subprocess
import sys
import time
from pathlib import Path

import httpx

PORT = 8773
BASE = f"http://127.0.0.1:{PORT}"
HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "test" / "fixtures" / "budget_cases.json"

CSV = "Sal,Dept\n10,A\n20,B\n30,A\n"


def sample_triples(count: int, seed: int = 20240817):
    rng = random.Random(seed)
    triples = [(10**6, 1e-6, 0.04)]  # the canonical case, b = 8852
    while len(triples) < count:
        m = int(10 ** rng.uniform(0, 9))
        p = 10 ** rng.uniform(-9, -0.05)
        epsilon = rng.uniform(0.03, 1.5)
        triples.append((max(m, 1), p, epsilon))
    return triples


def main() -> int:
    server = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "uvicorn",
            "agglineage.service:app",
            "--port",
            str(PORT),
            "--log-level",
            "warning",
        ],
    )
    try:
        with httpx.Client(base_url=BASE, timeout=30.0) as client:
            for _ in range(100):
                try:
                    client.get("/docs")
                    break
                except httpx.TransportError:
                    time.sleep(0.1)
            dataset = client.post(
                "/datasets", content=CSV, headers={"content-type": "text/csv"}
            ).json()
            cases = []
            for m, p, epsilon in sample_triples(50):
                response = client.post(
                    f"/datasets/{dataset['id']}/sketches",
                    json={"attribute": "Sal", "m": m, "p": p, "epsilon": epsilon},
                )
                response.raise_for_status()
                cases.append(
                    {"m": m, "p": p, "epsilon": epsilon, "b": response.json()["b"]}
                )
        OUT.parent.mkdir(parents=True, exist_ok=True)
        OUT.write_text(json.dumps(cases, indent=2) + "\n")
        print(f"wrote {OUT} with {len(cases)} cases")
        return 0
    finally:
        server.terminate()
        server.wait(timeout=10)


if __name__ == "__main__":
    raise SystemExit(main())
