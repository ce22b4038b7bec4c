"""A small Make-style rule runner with checksum-validated data handling.

Pipeline files use a strict subset of Makefile syntax::

    # comment
    .PHONY: data report
    report: out/report.md
    out/report.md: out/results.txt
    <TAB>voxelrun --out out report

No variables, pattern rules or multi-target rules. Rules are rebuilt
when their target file is missing or older than a prerequisite, or,
in content-hash mode, when a prerequisite's sha256 changed since the
last successful run.
"""

import hashlib
import json
import logging
import os
import re
import subprocess
import sys
import tempfile
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field

from ._fileio import atomic_write
from .exceptions import (CycleDetected, DigestMismatch, DuplicateTarget,
                         MalformedManifest, MissingColon, NetworkError,
                         PipelineSyntaxError, RecipeFailed, RecipeWithoutRule,
                         UnknownTarget)

log = logging.getLogger(__name__)

DEFAULT_PIPELINE = "Pipeline"
HASH_CACHE_NAME = ".voxelrun-hashes"
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
_HEX64 = re.compile(r"[0-9a-f]{64}\Z")
_CHUNK = 1 << 16


@dataclass
class Rule:
    target: str
    prerequisites: list = field(default_factory=list)
    recipe: list = field(default_factory=list)


@dataclass
class RuleGraph:
    rules: dict = field(default_factory=dict)
    phony: set = field(default_factory=set)

    @property
    def default_target(self):
        return next(iter(self.rules), None)

    def __contains__(self, target):
        return target in self.rules


def parse_pipeline(text):
    """Parse pipeline text into a :class:`RuleGraph` (rules in file order)."""
    graph = RuleGraph()
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.startswith("\t"):
            if current is None:
                raise RecipeWithoutRule(lineno, "recipe line before any rule")
            if raw[1:].strip():
                current.recipe.append(raw[1:])
            continue
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise MissingColon(lineno, f"expected 'target: prerequisites', got {line!r}")
        head, _, tail = line.partition(":")
        names = head.split()
        prereqs = tail.split()
        if head.strip() == ".PHONY":
            graph.phony.update(prereqs)
            current = None
            continue
        if len(names) != 1:
            raise PipelineSyntaxError(lineno, "rules must have exactly one target")
        target = names[0]
        if target in graph.rules:
            raise DuplicateTarget(lineno, f"target {target!r} defined twice")
        current = Rule(target, prereqs, [])
        graph.rules[target] = current
    return graph


def load_pipeline(path):
    with open(path) as fobj:
        return parse_pipeline(fobj.read())


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fobj:
        for chunk in iter(lambda: fobj.read(_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _mtime(path):
    try:
        return os.stat(path).st_mtime_ns
    except FileNotFoundError:
        return None


def plan(graph, target=None, root_dir=".", hash_cache=None):
    """Rules that must run to bring ``target`` up to date, in execution order.

    Prerequisites are visited depth first and each rule is listed after
    everything it depends on. ``hash_cache`` (path -> sha256) switches
    staleness from modification times to prerequisite content.
    """
    target = target if target is not None else graph.default_target
    if target is None:
        return []
    order = []
    state = {}  # name -> "active" | "done"
    stale = {}
    stack = []

    def path_of(name):
        return os.path.join(root_dir, name)

    def visit(name):
        if state.get(name) == "done":
            return
        if state.get(name) == "active":
            raise CycleDetected(stack[stack.index(name):] + [name])
        rule = graph.rules.get(name)
        if rule is None:
            if os.path.exists(path_of(name)):
                state[name] = "done"
                stale[name] = False
                return
            raise UnknownTarget(f"no rule to make {name!r} and no such file")
        state[name] = "active"
        stack.append(name)
        for dep in rule.prerequisites:
            visit(dep)
        stack.pop()
        state[name] = "done"
        stale[name] = _is_stale(graph, rule, stale, path_of, hash_cache)
        if stale[name]:
            order.append(rule)

    visit(target)
    return order


def _is_stale(graph, rule, stale, path_of, hash_cache):
    if any(stale.get(dep) for dep in rule.prerequisites):
        return True
    if rule.target in graph.phony:
        return bool(rule.recipe)
    target_time = _mtime(path_of(rule.target))
    if target_time is None:
        return True
    for dep in rule.prerequisites:
        if dep in graph.phony:
            continue
        dep_path = path_of(dep)
        if hash_cache is not None:
            if os.path.isfile(dep_path) and hash_cache.get(dep) != sha256_file(dep_path):
                return True
        else:
            dep_time = _mtime(dep_path)
            if dep_time is not None and dep_time > target_time:
                return True
    return False


@dataclass
class CommandResult:
    target: str
    command: str
    exit_status: int
    wall_time_s: float


@dataclass
class ExecutionReport:
    commands: list = field(default_factory=list)
    ok: bool = True

    @property
    def n_commands(self):
        return len(self.commands)


def execute(plan_rules, working_dir=".", echo=True, env=None):
    """Run recipe lines in order through the shell, stopping at the first failure.

    A failing rule's target is removed if the failed recipe touched it,
    so no half-written target survives to look up to date next time.
    """
    report = ExecutionReport()
    for rule in plan_rules:
        target_path = os.path.join(working_dir, rule.target)
        before = _mtime(target_path)
        for line in rule.recipe:
            if echo:
                print(line, file=sys.stderr, flush=True)
            start = time.perf_counter()
            proc = subprocess.run(line, shell=True, cwd=working_dir, env=env)
            elapsed = time.perf_counter() - start
            report.commands.append(CommandResult(rule.target, line, proc.returncode, elapsed))
            if proc.returncode != 0:
                report.ok = False
                if os.path.isfile(target_path) and _mtime(target_path) != before:
                    os.unlink(target_path)
                err = RecipeFailed(rule.target, line, proc.returncode)
                err.report = report
                raise err
    return report


def reachable_rules(graph, target):
    seen, out = set(), []

    def walk(name):
        if name in seen or name not in graph.rules:
            return
        seen.add(name)
        for dep in graph.rules[name].prerequisites:
            walk(dep)
        out.append(graph.rules[name])

    walk(target)
    return out


def prerequisite_digests(graph, target, root_dir="."):
    """sha256 of every existing file prerequisite reachable from ``target``."""
    digests = {}
    for rule in reachable_rules(graph, target):
        for dep in rule.prerequisites:
            path = os.path.join(root_dir, dep)
            if dep not in graph.phony and os.path.isfile(path):
                digests[dep] = sha256_file(path)
    return digests


def run(pipeline_path, target=None, use_hash=False, echo=True, env=None):
    """Plan and execute ``target`` from a pipeline file.

    Recipes run in the pipeline file's directory. In hash mode the
    digest cache next to the pipeline file is refreshed after success.
    """
    pipeline_path = os.path.abspath(pipeline_path)
    root = os.path.dirname(pipeline_path)
    graph = load_pipeline(pipeline_path)
    target = target if target is not None else graph.default_target
    cache_path = os.path.join(root, HASH_CACHE_NAME)
    cache = None
    if use_hash:
        cache = load_manifest(cache_path).entries if os.path.exists(cache_path) else {}
    rules = plan(graph, target, root, cache)
    report = execute(rules, root, echo=echo, env=env)
    if use_hash and target is not None:
        cache = dict(cache)
        cache.update(prerequisite_digests(graph, target, root))
        save_manifest(HashManifest(cache), cache_path)
    return report


# -- checksum manifests ------------------------------------------------------

@dataclass
class HashManifest:
    entries: dict = field(default_factory=dict)


@dataclass
class FileCheck:
    path: str
    status: str  # "ok" | "missing" | "mismatch"
    actual: str = None

    @property
    def ok(self):
        return self.status == "ok"


def parse_manifest(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise MalformedManifest(f"manifest is not valid JSON: {err}") from None
    if not isinstance(obj, dict):
        raise MalformedManifest("manifest must be a JSON object")
    for path, digest in obj.items():
        if not isinstance(digest, str) or not _HEX64.match(digest):
            raise MalformedManifest(f"{path!r}: digest must be 64 lowercase hex characters")
        if not path or path.startswith("/") or "\\" in path:
            raise MalformedManifest(f"{path!r}: paths must be relative and '/'-separated")
    return HashManifest(dict(obj))


def load_manifest(path):
    with open(path) as fobj:
        return parse_manifest(fobj.read())


def manifest_text(manifest):
    return json.dumps(manifest.entries, indent=2, sort_keys=True) + "\n"


def save_manifest(manifest, path):
    atomic_write(path, manifest_text(manifest).encode("utf-8"))


def build_manifest(root_dir, paths=None):
    """Manifest of all files under ``root_dir`` (or just ``paths``)."""
    if paths is None:
        paths = []
        for dirpath, dirnames, filenames in os.walk(root_dir):
            dirnames.sort()
            for name in sorted(filenames):
                full = os.path.join(dirpath, name)
                paths.append(os.path.relpath(full, root_dir).replace(os.sep, "/"))
    return HashManifest({p: sha256_file(os.path.join(root_dir, p)) for p in paths})


def validate_files(manifest, root_dir="."):
    """Check each manifest entry against the file under ``root_dir``."""
    results = []
    for rel, expected in manifest.entries.items():
        path = os.path.join(root_dir, *rel.split("/"))
        if not os.path.isfile(path):
            results.append(FileCheck(rel, "missing"))
            continue
        actual = sha256_file(path)
        if actual == expected:
            results.append(FileCheck(rel, "ok"))
        else:
            results.append(FileCheck(rel, "mismatch", actual))
    return results


def _open_url(url):
    parsed = urllib.parse.urlparse(url)
    if parsed.scheme == "file":
        # file:relative/path is resolved against the working directory
        local = urllib.request.url2pathname(parsed.path)
        if parsed.netloc and parsed.netloc != "localhost":
            local = "//" + parsed.netloc + local
        try:
            return open(local, "rb")
        except OSError as err:
            raise NetworkError(f"cannot read {url}: {err}") from None
    if parsed.scheme not in ("http", "https"):
        raise NetworkError(f"unsupported URL scheme {parsed.scheme!r} in {url}")
    try:
        return urllib.request.urlopen(url, timeout=60)
    except (urllib.error.URLError, OSError) as err:
        raise NetworkError(f"cannot fetch {url}: {err}") from None


def fetch(url, dest_path, expected_digest=None):
    """Download ``url`` to ``dest_path``, verifying the sha256 if given.

    An existing destination whose digest already matches is left alone.
    Returns True if a transfer happened.
    """
    if expected_digest is not None and os.path.isfile(dest_path) \
            and sha256_file(dest_path) == expected_digest:
        return False
    directory = os.path.dirname(os.path.abspath(dest_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".fetch-", dir=directory)
    try:
        digest = hashlib.sha256()
        with os.fdopen(fd, "wb") as out, _open_url(url) as src:
            try:
                for chunk in iter(lambda: src.read(_CHUNK), b""):
                    digest.update(chunk)
                    out.write(chunk)
            except OSError as err:
                raise NetworkError(f"transfer of {url} failed: {err}") from None
        actual = digest.hexdigest()
        if expected_digest is not None and actual != expected_digest:
            raise DigestMismatch(dest_path, expected_digest, actual)
        os.replace(tmp, dest_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    log.info("fetched %s -> %s", url, dest_path)
    return True


def fetch_manifest(manifest, base_url, dest_dir):
    """Fetch every manifest entry from ``base_url/<path>`` into ``dest_dir``."""
    transferred = []
    for rel, digest in manifest.entries.items():
        url = base_url.rstrip("/") + "/" + urllib.parse.quote(rel)
        dest = os.path.join(dest_dir, *rel.split("/"))
        if fetch(url, dest, digest):
            transferred.append(rel)
    return transferred

