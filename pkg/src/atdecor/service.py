"""HTTP/JSON facade over the solver modules for the analyst workbench.

Sessions live in memory (optionally snapshotted to JSON files).  Every
mutation bumps a revision counter; results are stamped with the revision
they were computed at and re-served with a stale flag once the session has
moved on.  Runs with the same seed at the same revision are cached, so
repeating them returns byte-identical documents.

Endpoints:
    POST /sessions                {example} or {tree, domain, predicates}
    GET  /sessions/{id}
    POST /sessions/{id}/mutations {op: enable|disable|add|remove|pin, ...}
    POST /sessions/{id}/run       {operation, options}
    GET  /sessions/{id}/results/{operation}
    GET  /sessions/{id}/events    (server-sent events, replayed)
    GET  /healthz
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse

from .corpus import CorpusError, load_corpus
from .domains import DomainError, builtin_domain
from .predicates import (
    Cmp,
    Const,
    ConstraintSet,
    Label,
    Predicate,
    PredicateSyntaxError,
    Provenance,
    parse_predicate,
)
from .relax_inclusion import relax_inclusion_exact, relax_inclusion_greedy
from .relax_maxweak import relax_maxweak
from .solver import SolverConfig, SolverError, classify, solve, unsat_core
from .tree import TreeSyntaxError, labels_of, parse_tree, tree_to_json

_OPERATIONS = ("solve", "classify", "core", "relax-inclusion", "relax-inclusion-exact", "relax-maxweak")


@dataclass
class _Entry:
    pred: Predicate
    enabled: bool = True

    def to_json(self):
        return {
            "id": self.pred.id,
            "text": str(self.pred),
            "hard": self.pred.is_hard,
            "provenance": self.pred.provenance.value,
            "enabled": self.enabled,
        }


@dataclass
class Session:
    id: str
    tree: object
    domain: object
    entries: list
    revision: int = 0
    results: dict = field(default_factory=dict)  # op -> {revision, options_key, body}
    events: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def constraint_set(self) -> ConstraintSet:
        hard = [e.pred for e in self.entries if e.enabled and e.pred.is_hard]
        soft = [e.pred for e in self.entries if e.enabled and not e.pred.is_hard]
        return ConstraintSet(hard, soft)

    def push_event(self, kind, **data):
        self.events.append({"seq": len(self.events), "type": kind, **data})

    def bump(self, reason):
        self.revision += 1
        self.push_event("revision", revision=self.revision, reason=reason)

    def summary(self):
        return {
            "id": self.id,
            "revision": self.revision,
            "domain": self.domain.name,
            "tree": tree_to_json(self.tree),
            "labels": sorted(labels_of(self.tree)),
            "predicates": [e.to_json() for e in self.entries],
        }


def _error(status, message, **extra):
    raise HTTPException(status_code=status, detail={"message": str(message), **extra})


def build_app(snapshot_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="atdecor", version="0.1.0")
    sessions: dict[str, Session] = {}

    def _session(sid) -> Session:
        try:
            return sessions[sid]
        except KeyError:
            _error(404, f"unknown session {sid}")

    def _snapshot(session: Session):
        if snapshot_dir is None:
            return
        path = Path(snapshot_dir) / f"{session.id}.json"
        body = {
            "id": session.id,
            "revision": session.revision,
            "domain": session.domain.name,
            "tree": tree_to_json(session.tree),
            "predicates": [e.to_json() for e in session.entries],
        }
        path.write_text(json.dumps(body, sort_keys=True, indent=2), encoding="utf-8")

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        try:
            if "example" in body:
                entry = load_corpus(body["example"])
                tree = entry.tree
                domain = builtin_domain(body.get("domain", entry.domain_name))
                preds = list(entry.hard) + list(entry.knowledge) + list(entry.historical)
            else:
                tree = parse_tree(body["tree"])
                domain = builtin_domain(body["domain"])
                preds = []
                for spec in body.get("predicates", []):
                    prov = (
                        Provenance.HARD_STRUCTURAL
                        if spec.get("kind") == "hard"
                        else Provenance(spec.get("provenance", "soft-domain-knowledge"))
                    )
                    preds.append(parse_predicate(spec["text"], prov))
        except (TreeSyntaxError, PredicateSyntaxError) as exc:
            _error(422, exc, line=getattr(exc, "line", None), column=getattr(exc, "column", None))
        except (CorpusError, DomainError, KeyError, ValueError) as exc:
            _error(422, exc)
        sid = uuid.uuid4().hex[:12]
        session = Session(sid, tree, domain, [_Entry(p) for p in preds])
        sessions[sid] = session
        session.push_event("revision", revision=0, reason="created")
        _snapshot(session)
        return session.summary()

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _session(sid).summary()

    @app.post("/sessions/{sid}/mutations")
    def mutate(sid: str, body: dict):
        session = _session(sid)
        op = body.get("op")
        with session.lock:
            if op in ("enable", "disable"):
                pid = body.get("predicate_id")
                entry = next((e for e in session.entries if e.pred.id == pid), None)
                if entry is None:
                    _error(404, f"unknown predicate id {pid!r}")
                entry.enabled = op == "enable"
            elif op == "remove":
                pid = body.get("predicate_id")
                before = len(session.entries)
                session.entries = [e for e in session.entries if e.pred.id != pid]
                if len(session.entries) == before:
                    _error(404, f"unknown predicate id {pid!r}")
            elif op == "add":
                try:
                    prov = (
                        Provenance.HARD_STRUCTURAL
                        if body.get("kind") == "hard"
                        else Provenance.SOFT_DOMAIN_KNOWLEDGE
                    )
                    pred = parse_predicate(body["text"], prov)
                except (PredicateSyntaxError, KeyError) as exc:
                    _error(422, exc)
                stray = pred.labels() - labels_of(session.tree)
                if stray:
                    _error(422, f"unknown labels {sorted(stray)}")
                if any(e.pred.id == pred.id for e in session.entries):
                    _error(422, f"predicate {pred.id!r} already present")
                session.entries.append(_Entry(pred))
            elif op == "pin":
                label = body.get("label")
                if label not in labels_of(session.tree):
                    _error(404, f"unknown label {label!r}")
                value = float(body["value"])
                pred = Predicate(Cmp("eq", Label(label), Const(value)))
                if any(e.pred.id == pred.id for e in session.entries):
                    _error(422, f"predicate {pred.id!r} already present")
                session.entries.append(_Entry(pred))
            else:
                _error(422, f"unknown mutation op {op!r}")
            session.bump(op)
            _snapshot(session)
            return {"revision": session.revision}

    @app.post("/sessions/{sid}/run")
    def run(sid: str, body: dict):
        session = _session(sid)
        operation = body.get("operation")
        if operation not in _OPERATIONS:
            _error(422, f"unknown operation {operation!r}")
        options = body.get("options") or {}
        options_key = json.dumps(options, sort_keys=True)
        with session.lock:
            cached = session.results.get(operation)
            if (
                cached is not None
                and cached["revision"] == session.revision
                and cached["options_key"] == options_key
            ):
                return cached["body"]
            config = SolverConfig(
                seed=int(options.get("seed", 0)),
                restarts=int(options.get("restarts", 64)),
                progress=lambda ev: session.push_event("progress", op=operation, **ev),
            )
            constraints = session.constraint_set()
            try:
                if operation == "solve":
                    result = solve(session.tree, session.domain, constraints, config).to_json()
                elif operation == "classify":
                    result = classify(session.tree, session.domain, constraints, config).to_json()
                elif operation == "core":
                    result = unsat_core(session.tree, session.domain, constraints, config).to_json()
                elif operation == "relax-inclusion":
                    order = options.get("order")
                    result = relax_inclusion_greedy(
                        session.tree, session.domain, constraints, order, config
                    ).to_json()
                elif operation == "relax-inclusion-exact":
                    result = relax_inclusion_exact(
                        session.tree, session.domain, constraints, config
                    ).to_json()
                else:
                    result = relax_maxweak(session.tree, session.domain, constraints, config).to_json()
            except SolverError as exc:
                _error(409, exc)
            body_out = {
                "operation": operation,
                "revision": session.revision,
                "stale": False,
                "result": result,
            }
            session.results[operation] = {
                "revision": session.revision,
                "options_key": options_key,
                "body": body_out,
            }
            session.push_event("result", op=operation, revision=session.revision)
            return body_out

    @app.get("/sessions/{sid}/results/{operation}")
    def results(sid: str, operation: str):
        session = _session(sid)
        cached = session.results.get(operation)
        if cached is None:
            _error(404, f"no {operation} result yet")
        body = dict(cached["body"])
        body["stale"] = cached["revision"] != session.revision
        return body

    @app.get("/sessions/{sid}/events")
    def events(sid: str):
        session = _session(sid)

        def stream():
            for ev in list(session.events):
                payload = json.dumps(ev, sort_keys=True)
                yield f"id: {ev['seq']}\nevent: {ev['type']}\ndata: {payload}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
