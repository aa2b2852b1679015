"""Reference external sampler: exhaustive QUBO minimization.

Speaks the JSON contract of :func:`crackbench.qseg.sample_external`, over
stdin/stdout::

    python -m crackbench.sampler_stub < request.json

or as an HTTP endpoint::

    python -m crackbench.sampler_stub --serve 8765

Only small problems are accepted (``n <= 24``); it exists to test adapters
and as a template for wrapping real hardware or cloud samplers.
"""

import argparse
import json
import sys
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np

MAX_VARS = 24


def solve_request(req: dict) -> dict:
    n = int(req["n"])
    if n > MAX_VARS:
        raise ValueError(f"exhaustive stub handles at most {MAX_VARS} variables, got {n}")
    lin = np.asarray(req.get("linear", [0.0] * n), dtype=np.float64)
    quad = req.get("quadratic", [])
    best_e, best_x = 0.0, np.zeros(n, dtype=np.int64)
    if n:
        best_e = np.inf
        chunk = 1 << min(n, 16)
        for start in range(0, 1 << n, chunk):
            codes = np.arange(start, start + chunk, dtype=np.int64)
            x = (codes[:, None] >> np.arange(n)) & 1
            e = x @ lin
            for i, j, v in quad:
                e = e + v * (x[:, int(i)] * x[:, int(j)])
            k = int(np.argmin(e))
            if e[k] < best_e:
                best_e, best_x = float(e[k]), x[k]
    return {"assignment": [int(v) for v in best_x], "energy": float(best_e)}


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.dumps(solve_request(json.loads(self.rfile.read(length)))).encode()
            status = 200
        except Exception as exc:  # report any failure to the client
            body = json.dumps({"error": str(exc)}).encode()
            status = 400
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


def make_server(port: int = 0, host: str = "127.0.0.1") -> HTTPServer:
    return HTTPServer((host, port), _Handler)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--serve", type=int, metavar="PORT", help="serve HTTP on PORT instead of stdin/stdout")
    args = ap.parse_args(argv)
    if args.serve is not None:
        make_server(args.serve).serve_forever()
        return 0
    json.dump(solve_request(json.load(sys.stdin)), sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
