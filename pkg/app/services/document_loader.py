"""
Function and ODE document loader with caching
Parsed documents are cached by the sha256 digest of their bytes
"""

import hashlib
import json
import os
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import ValidationError

from app.config import settings
from app.models.funcrep import RepFunc, make_func
from app.models.qde import CoefficientSet
from app.schemas.requests import FuncDocument, KernelDocument, OdeProblem
from app.utils.errors import DocumentIOError, DomainMismatch, InvariantError, SchemaError
from app.utils.logger import logger


def digest(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def _pointer(loc: Tuple[Any, ...]) -> str:
    return "/" + "/".join(str(p) for p in loc)


def build_problem(problem: OdeProblem, series_tol: Optional[float] = None) -> Tuple[CoefficientSet, Tuple[float, ...]]:
    """Coefficient set and gamma of a validated ODE document."""
    if len(problem.p) != problem.n + 1:
        raise InvariantError(f"order {problem.n} needs {problem.n + 1} coefficient functions, got {len(problem.p)}",
                             pointer="/p")
    if len(problem.gamma) != problem.n:
        raise InvariantError(f"order {problem.n} needs {problem.n} initial values", pointer="/gamma")
    funcs = []
    for k, doc in enumerate(problem.p):
        if tuple(doc.domain) != tuple(problem.domain):
            raise DomainMismatch(f"p_{k + 1} domain {doc.domain} differs from {problem.domain}",
                                 pointer=f"/p/{k}/domain")
        try:
            funcs.append(make_func(doc, series_tol))
        except (SchemaError, InvariantError) as exc:
            exc.pointer = f"/p/{k}{exc.pointer or ''}"
            raise
    return CoefficientSet.create(funcs), tuple(problem.gamma)


def kernel_pairs(doc: KernelDocument, series_tol: Optional[float] = None) -> List[Tuple[RepFunc, RepFunc]]:
    pairs = []
    for i, term in enumerate(doc.terms):
        try:
            pairs.append((make_func(term.u, series_tol), make_func(term.v, series_tol)))
        except (SchemaError, InvariantError) as exc:
            exc.pointer = f"/terms/{i}{exc.pointer or ''}"
            raise
    return pairs


class DocumentLoader:
    """Singleton document loader with caching"""

    _instance: Optional['DocumentLoader'] = None
    _documents: "OrderedDict[str, Any]" = OrderedDict()

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._documents:
            logger.debug("🔧 Initializing DocumentLoader...")

    @property
    def cached(self) -> int:
        return len(self._documents)

    def clear(self) -> None:
        self._documents.clear()

    def read(self, path: str | os.PathLike) -> Tuple[bytes, str]:
        """Raw bytes and their digest"""
        p = Path(path)
        if not p.is_file():
            raise DocumentIOError(f"cannot read document: {p}")
        try:
            raw = p.read_bytes()
        except OSError as exc:
            raise DocumentIOError(f"cannot read document {p}: {exc}")
        if len(raw) > settings.max_document_size:
            raise DocumentIOError(f"document {p} exceeds {settings.max_document_size} bytes")
        return raw, digest(raw)

    def _json(self, raw: bytes, path: Path) -> Any:
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc.msg})", pointer="")

    def _cached(self, key: str, build):
        if settings.document_cache_enabled and key in self._documents:
            logger.debug(f"✅ Document {key[:12]} loaded from cache")
            self._documents.move_to_end(key)
            return self._documents[key]
        value = build()
        if settings.document_cache_enabled:
            self._documents[key] = value
            while len(self._documents) > max(settings.document_cache_size, 0):
                evicted, _ = self._documents.popitem(last=False)
                logger.debug(f"🗑️ Evicted document {evicted[:12]} from cache")
        return value

    def load_func(self, path: str | os.PathLike, series_tol: Optional[float] = None) -> Tuple[RepFunc, str]:
        raw, sha = self.read(path)
        key = f"func:{sha}:{series_tol}"
        logger.debug(f"📂 Loading function document: {path}")
        return self._cached(key, lambda: make_func(self._json(raw, Path(path)), series_tol)), sha

    def load_ode(self, path: str | os.PathLike,
                 series_tol: Optional[float] = None) -> Tuple[CoefficientSet, Tuple[float, ...], Optional[float], str]:
        raw, sha = self.read(path)
        data = self._json(raw, Path(path))
        try:
            problem = OdeProblem.model_validate(data)
        except ValidationError as exc:
            first = exc.errors()[0]
            raise SchemaError(first["msg"], pointer=_pointer(first["loc"]))
        coeffs, gamma = self._cached(f"ode:{sha}:{series_tol}", lambda: build_problem(problem, series_tol))
        return coeffs, gamma, problem.tol, sha

    def load_document(self, doc: FuncDocument, series_tol: Optional[float] = None) -> Tuple[RepFunc, str]:
        """Function embedded in a request body; digest of its canonical JSON"""
        sha = digest(doc.model_dump_json().encode())
        return self._cached(f"func:{sha}:{series_tol}", lambda: make_func(doc, series_tol)), sha

    def load_kernel(self, path: str | os.PathLike, series_tol: Optional[float] = None) -> Tuple[List[Tuple[RepFunc, RepFunc]], str]:
        """Separable kernel document: list of (u, v) factor pairs"""
        raw, sha = self.read(path)
        try:
            doc = KernelDocument.model_validate(self._json(raw, Path(path)))
        except ValidationError as exc:
            first = exc.errors()[0]
            raise SchemaError(first["msg"], pointer=_pointer(first["loc"]))
        return kernel_pairs(doc, series_tol), sha

    def load_directory(self, folder: str | os.PathLike) -> Dict[str, bool]:
        """Parse every function document in a folder (startup warm-up)"""
        status: Dict[str, bool] = {}
        root = Path(folder)
        if not root.is_dir():
            logger.warning(f"⚠️  Fixture folder not found: {root}")
            return status
        for p in sorted(root.glob("*.json")):
            try:
                raw, _ = self.read(p)
                data = self._json(raw, p)
                if "terms" in data:
                    self.load_kernel(p)
                elif "domain" in data and "n" not in data:
                    FuncDocument.model_validate(data)
                    self.load_func(p)
                else:
                    self.load_ode(p)
                status[p.stem] = True
            except Exception as e:
                status[p.stem] = False
                logger.warning(f"⚠️  Fixture {p.name} failed: {e}")
        logger.info(f"✅ Fixtures parsed: {sum(status.values())}/{len(status)}")
        return status


# Global document loader instance
document_loader = DocumentLoader()


def parse_func_file(path: str | os.PathLike, series_tol: Optional[float] = None) -> RepFunc:
    return document_loader.load_func(path, series_tol)[0]


def parse_ode_file(path: str | os.PathLike,
                   series_tol: Optional[float] = None) -> Tuple[CoefficientSet, Tuple[float, ...]]:
    coeffs, gamma, _, _ = document_loader.load_ode(path, series_tol)
    return coeffs, gamma
