"""Child-process driver for candidate programs; copied next to solution.py.

Modes: ``check`` compiles only; ``call`` instantiates ``Solution`` and calls
its public method with arguments read from stdin; ``script`` runs the file.
"""

import ast
import json
import os
import sys

COMPILE_EXIT = 97
WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_APPEND | os.O_TRUNC


def compile_solution():
    with open("solution.py", encoding="utf-8") as fh:
        src = fh.read()
    try:
        return compile(src, "solution.py", "exec")
    except SyntaxError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc.msg} (solution.py, line {exc.lineno})\n")
        sys.exit(COMPILE_EXIT)


def install_guard(root):
    root = os.path.realpath(root)

    def inside(path):
        if isinstance(path, int):
            return True
        try:
            real = os.path.realpath(os.fsdecode(path))
        except Exception:
            return False
        return real == root or real.startswith(root + os.sep)

    def hook(event, args):
        if event == "open":
            path, mode, flags = args
            writing = (mode is not None and any(ch in mode for ch in "wax+")) or (
                mode is None and flags & WRITE_FLAGS
            )
            if writing and not inside(path):
                raise PermissionError(f"sandbox: write outside working directory: {path}")
        elif event in ("os.remove", "os.rmdir", "os.mkdir", "os.rename", "os.chmod", "shutil.rmtree"):
            if not inside(args[0]):
                raise PermissionError(f"sandbox: {event} outside working directory")
        elif event.startswith(("socket.connect", "socket.bind", "socket.sendto", "socket.getaddrinfo")):
            raise PermissionError("sandbox: network access is disabled")
        elif event in ("subprocess.Popen", "os.system", "os.exec", "os.posix_spawn", "os.spawn", "os.fork", "os.forkpty"):
            raise PermissionError("sandbox: process creation is disabled")
        elif event == "ctypes.dlopen":
            raise PermissionError("sandbox: ctypes is disabled")

    sys.addaudithook(hook)


class _Literals(ast.NodeTransformer):
    NAMES = {"true": True, "false": False, "null": None}

    def visit_Name(self, node):
        if node.id in self.NAMES:
            return ast.copy_location(ast.Constant(self.NAMES[node.id]), node)
        return node


def parse_arguments(text):
    """``n = 4, k = 3`` (or one ``name = value`` per line) -> kwargs; else one JSON value per line -> args."""
    text = text.strip()
    if not text:
        return [], {}
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if all("=" in ln for ln in lines):
        call = ast.parse("f(" + ", ".join(lines) + ")", mode="eval")
        call = _Literals().visit(call)
        kwargs = {kw.arg: ast.literal_eval(kw.value) for kw in call.body.keywords}
        return [], kwargs
    return [json.loads(ln) for ln in lines], {}


def format_result(value):
    if isinstance(value, bool) or value is None or isinstance(value, (list, tuple, dict, str)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def public_method(cls):
    for name, attr in vars(cls).items():
        if not name.startswith("_") and callable(attr):
            return name
    raise AttributeError("Solution has no public method")


def main():
    mode = sys.argv[1]
    code = compile_solution()
    if mode == "check":
        return
    import collections, functools, heapq, itertools, math, typing  # noqa: E401

    namespace = {"__name__": "__main__" if mode == "script" else "solution"}
    for mod in (collections, functools, heapq, itertools, math):
        namespace[mod.__name__] = mod
    namespace.update({k: getattr(typing, k) for k in ("List", "Dict", "Optional", "Tuple", "Set")})
    if mode == "call":
        args, kwargs = parse_arguments(sys.stdin.read())
        install_guard(os.getcwd())
        exec(code, namespace)
        obj = namespace["Solution"]()
        result = getattr(obj, public_method(namespace["Solution"]))(*args, **kwargs)
        sys.stdout.write(format_result(result) + "\n")
    else:
        install_guard(os.getcwd())
        exec(code, namespace)


if __name__ == "__main__":
    main()
