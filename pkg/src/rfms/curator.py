"""The restricted-query boundary around curator sites.

A curator answers model-performance queries with a single scalar; the querying
side never sees rows. Handles come in two transports — in-process and TCP with
one JSON object per line — that return bit-identical answers for identical
inputs and seeds. Thresholdout curators additionally need the caller's own
openbox loss, since the mechanism compares local against holdout performance.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import socket
import threading

import numpy as np

from .datamodel import Dataset
from .errors import ProtocolError, TransportError
from .learners import deserialize_model, evaluate, learner_of, serialize_model
from .thresholdout import ThresholdoutMechanism

log = logging.getLogger(__name__)

MEASURE = "mmce"


class HonestStrategy:
    """Answers with the exact loss on the site data."""

    name = "honest"

    def answer(self, model, dataset: Dataset, aux_openbox_loss: float | None) -> float:
        return evaluate(model, dataset)


class ThresholdoutStrategy:
    """Perturbs answers through a thresholdout mechanism."""

    name = "thresholdout"

    def __init__(self, mechanism: ThresholdoutMechanism):
        self.mechanism = mechanism

    def answer(self, model, dataset: Dataset, aux_openbox_loss: float | None) -> float:
        if aux_openbox_loss is None:
            raise ProtocolError("missing_aux: thresholdout needs the openbox loss")
        true_loss = evaluate(model, dataset)
        return self.mechanism.answer(float(aux_openbox_loss), true_loss)


class CuratorSite:
    """Server-side state: the site data plus an answer strategy."""

    def __init__(self, dataset: Dataset, strategy):
        self._dataset = dataset
        self._strategy = strategy
        self._lock = threading.Lock()
        self._query_count = 0

    @property
    def inbag_size(self) -> int:
        return self._dataset.n_rows

    @property
    def query_count(self) -> int:
        return self._query_count

    def answer(self, model, aux_openbox_loss: float | None = None) -> float:
        with self._lock:
            self._query_count += 1
            return self._strategy.answer(model, self._dataset, aux_openbox_loss)


class InProcessCurator:
    """Curator handle backed by a site object in the same process."""

    def __init__(self, site: CuratorSite):
        self._site = site

    @property
    def inbag_size(self) -> int:
        return self._site.inbag_size

    @property
    def query_count(self) -> int:
        return self._site.query_count

    def evaluate(self, model, aux_openbox_loss: float | None = None) -> float:
        return self._site.answer(model, aux_openbox_loss)


def curator_evaluate(handle, model, aux_openbox_loss: float | None = None) -> float:
    """Query one curator for the model's loss on its inbag data."""
    return handle.evaluate(model, aux_openbox_loss)


def _recv_lines(sock: socket.socket, buffer: bytearray):
    """Yield complete lines from the socket; returns on EOF."""
    while True:
        while b"\n" in buffer:
            line, _, rest = bytes(buffer).partition(b"\n")
            buffer[:] = rest
            yield line
        chunk = sock.recv(65536)
        if not chunk:
            return
        buffer.extend(chunk)


class CuratorServer:
    """TCP curator: one JSON request per line, responses matched by id."""

    def __init__(self, dataset: Dataset, strategy, host: str = "127.0.0.1", port: int = 0):
        self._site = CuratorSite(dataset, strategy)
        self._host = host
        self._port = port
        self._sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._running = False

    @property
    def address(self) -> tuple[str, int]:
        if self._sock is None:
            raise ProtocolError("server not started")
        return self._sock.getsockname()[:2]

    @property
    def query_count(self) -> int:
        return self._site.query_count

    def start(self) -> "CuratorServer":
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self._host, self._port))
        except OSError as exc:
            sock.close()
            raise TransportError(f"cannot bind curator to {self._host}:{self._port}: {exc}") from exc
        sock.listen()
        self._sock = sock
        self._running = True
        acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        acceptor.start()
        self._threads.append(acceptor)
        log.info("curator listening on %s:%d", *self.address)
        return self

    def stop(self):
        self._running = False
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass

    def _accept_loop(self):
        while self._running:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            worker = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
            worker.start()
            self._threads.append(worker)

    def _serve_connection(self, conn: socket.socket):
        buffer = bytearray()
        try:
            for line in _recv_lines(conn, buffer):
                if not line.strip():
                    continue
                response = self._handle_line(line)
                conn.sendall(json.dumps(response).encode("utf-8") + b"\n")
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def _handle_line(self, line: bytes) -> dict:
        try:
            msg = json.loads(line.decode("utf-8"))
            if not isinstance(msg, dict):
                raise ValueError("not an object")
        except (ValueError, UnicodeDecodeError) as exc:
            return _error(0, "bad_request", f"unparseable request line: {exc}")
        req_id = msg.get("id", 0)
        if not isinstance(req_id, int) or req_id < 0:
            return _error(0, "bad_request", "id must be a nonnegative integer")
        if msg.get("type") != "EVAL":
            return _error(req_id, "bad_request", f"unsupported message type {msg.get('type')!r}")
        if msg.get("measure", MEASURE) != MEASURE:
            return _error(req_id, "unsupported_measure", f"only {MEASURE} is served")
        model_b64 = msg.get("model_b64")
        if not isinstance(model_b64, str):
            return _error(req_id, "bad_request", "model_b64 must be a base64 string")
        try:
            model = deserialize_model(base64.b64decode(model_b64, validate=True))
        except (binascii.Error, Exception) as exc:  # codec errors included
            return _error(req_id, "bad_model", str(exc))
        learner = msg.get("learner")
        if learner is not None and learner != learner_of(model):
            return _error(req_id, "bad_model", f"payload is a {learner_of(model)} model, not {learner}")
        aux = msg.get("aux_openbox_loss")
        if aux is not None and not isinstance(aux, (int, float)):
            return _error(req_id, "bad_request", "aux_openbox_loss must be numeric or null")
        try:
            value = self._site.answer(model, None if aux is None else float(aux))
        except ProtocolError as exc:
            return _error(req_id, "missing_aux", str(exc))
        except Exception as exc:
            log.exception("curator failed to answer")
            return _error(req_id, "internal_error", str(exc))
        return {"type": "RESULT", "id": req_id, "value": value}


def _error(req_id: int, code: str, message: str) -> dict:
    return {"type": "ERROR", "id": req_id, "code": code, "message": message}


def serve_curator(dataset: Dataset, strategy, host: str = "127.0.0.1", port: int = 0) -> CuratorServer:
    """Start a curator server; returns the running server object."""
    return CuratorServer(dataset, strategy, host, port).start()


class RemoteCurator:
    """Client handle talking to a curator server over TCP."""

    def __init__(self, host: str, port: int, inbag_size: int, timeout: float = 30.0):
        self._host = host
        self._port = port
        self._inbag_size = int(inbag_size)
        self._timeout = timeout
        self._sock: socket.socket | None = None
        self._buffer = bytearray()
        self._next_id = 0
        self._count = 0
        self._lock = threading.Lock()

    @property
    def inbag_size(self) -> int:
        return self._inbag_size

    @property
    def query_count(self) -> int:
        return self._count

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection((self._host, self._port), timeout=self._timeout)
            except OSError as exc:
                raise TransportError(f"cannot reach curator at {self._host}:{self._port}: {exc}") from exc
            self._buffer = bytearray()
        return self._sock

    def close(self):
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def evaluate(self, model, aux_openbox_loss: float | None = None) -> float:
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            request = {
                "type": "EVAL",
                "id": req_id,
                "learner": learner_of(model),
                "model_b64": base64.b64encode(serialize_model(model)).decode("ascii"),
                "measure": MEASURE,
                "aux_openbox_loss": aux_openbox_loss,
            }
            sock = self._connect()
            try:
                sock.sendall(json.dumps(request).encode("utf-8") + b"\n")
                response = self._read_response(sock, req_id)
            except OSError as exc:
                self.close()
                raise TransportError(f"curator connection failed: {exc}") from exc
            if response.get("type") == "ERROR":
                raise ProtocolError(f"{response.get('code')}: {response.get('message')}")
            value = response.get("value")
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ProtocolError(f"curator answered with an invalid value {value!r}")
            self._count += 1
            return float(value)

    def _read_response(self, sock: socket.socket, req_id: int) -> dict:
        for line in _recv_lines(sock, self._buffer):
            try:
                msg = json.loads(line.decode("utf-8"))
            except ValueError as exc:
                raise ProtocolError(f"unparseable curator response: {exc}") from exc
            if msg.get("id") == req_id or (msg.get("type") == "ERROR" and msg.get("id") == 0):
                return msg
            # pipelined response for another request; with a locked handle this
            # means a protocol violation
            raise ProtocolError(f"response id {msg.get('id')} does not match request {req_id}")
        raise TransportError("curator closed the connection mid-request")


def make_in_process_curators(
    datasets: list[Dataset],
    mode: str = "honest",
    thresholdout_seeds: list[int] | None = None,
    thresholdout_kwargs: dict | None = None,
) -> list[InProcessCurator]:
    """Construct one in-process handle per curator dataset."""
    handles = []
    for i, ds in enumerate(datasets):
        if mode == "honest":
            strategy = HonestStrategy()
        elif mode == "thresholdout":
            seed = thresholdout_seeds[i] if thresholdout_seeds else i
            strategy = ThresholdoutStrategy(ThresholdoutMechanism(seed=seed, **(thresholdout_kwargs or {})))
        else:
            raise ProtocolError(f"unknown curator mode {mode!r}")
        handles.append(InProcessCurator(CuratorSite(ds, strategy)))
    return handles
