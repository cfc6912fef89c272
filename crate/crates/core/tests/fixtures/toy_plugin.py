#!/usr/bin/env python3
"""Minimal trainer plugin used by the host tests.

Serves `logistic_regression` (full-batch gradient descent from zero, same
parameters as the built-in trainer) plus a few misbehaving algorithms for
error-path tests. Flags:
  --version N     advertise protocol version N
  --exit-now      exit before saying hello
  --silent        never say hello
"""
import csv
import json
import math
import sys
import time


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    label = header.index("label")
    xs, ys = [], []
    for r in body:
        vals = [float(v) for v in r]
        ys.append(vals[label])
        xs.append([v for j, v in enumerate(vals) if j != label])
    return xs, ys


def sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def fit_logistic(xs, ys, lr, iterations, l2):
    n, d = len(xs), len(xs[0])
    w, b = [0.0] * d, 0.0
    for _ in range(iterations):
        gw, gb = [0.0] * d, 0.0
        for x, y in zip(xs, ys):
            r = sigmoid(b + sum(wi * xi for wi, xi in zip(w, x))) - y
            for j in range(d):
                gw[j] += r * x[j]
            gb += r
        w = [wj - lr * (g / n + l2 * wj) for wj, g in zip(w, gw)]
        b -= lr * gb / n
    return w, b


def main():
    args = sys.argv[1:]
    if "--exit-now" in args:
        return 3
    if "--silent" in args:
        time.sleep(60)
        return 0
    version = int(args[args.index("--version") + 1]) if "--version" in args else 1

    send({"type": "hello", "version": version,
          "algorithms": ["logistic_regression", "sleepy", "crash"]})
    models, counter = {}, 0
    for line in sys.stdin:
        msg = None
        if not line.strip():
            continue
        try:
            msg = json.loads(line)
            kind = msg.get("type")
            if kind == "hello_ack":
                continue
            if kind == "shutdown":
                return 0
            if kind == "train":
                params = msg.get("params", {})
                algo = msg["algorithm"]
                if algo == "crash":
                    sys.exit(9)
                if algo == "sleepy":
                    time.sleep(float(params.get("seconds", 1.0)))
                    model = ("const", 0.5)
                else:
                    known = {"learning_rate", "iterations", "l2"}
                    for k in params:
                        if k not in known:
                            raise ValueError("unknown parameter `%s`" % k)
                    lr = params.get("learning_rate", 0.1)
                    if not isinstance(lr, (int, float)) or lr <= 0:
                        raise ValueError("parameter `learning_rate` must be a positive number")
                    start = time.monotonic()
                    xs, ys = read_csv(msg["data_ref"])
                    model = ("lr", fit_logistic(xs, ys, float(lr), int(params.get("iterations", 100)),
                                                float(params.get("l2", 0.0))))
                    elapsed = time.monotonic() - start
                counter += 1
                model_id = "m%d" % counter
                models[model_id] = model
                send({"type": "trained", "config_id": msg["config_id"], "model_id": model_id,
                      "train_seconds": 0.0 if algo == "sleepy" else elapsed, "extra": "ignored"})
            elif kind == "predict":
                model_id = msg["model_id"]
                if model_id not in models:
                    raise KeyError("unknown model_id `%s`" % model_id)
                xs, _ = read_csv(msg["data_ref"])
                tag, m = models[model_id]
                if tag == "const":
                    values = [m] * len(xs)
                else:
                    w, b = m
                    values = [sigmoid(b + sum(wi * xi for wi, xi in zip(w, x))) for x in xs]
                send({"type": "scores", "model_id": model_id, "values": values})
            else:
                raise ValueError("unsupported message type %r" % kind)
        except SystemExit:
            raise
        except Exception as e:  # noqa: BLE001
            reply = {"type": "error", "message": str(e)}
            if isinstance(msg, dict) and "config_id" in msg:
                reply["config_id"] = msg["config_id"]
            send(reply)
    return 0


if __name__ == "__main__":
    sys.exit(main())
