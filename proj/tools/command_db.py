#!/usr/bin/env python3
"""Print `commands = ...` profile lines for a filesystem template.

The command database is every executable regular file or symlink directly
under the PATH directories of the template, plus the bash builtins and
keywords that can start a command line.
"""

import argparse
import sys

PATH_DIRS = ["/usr/local/sbin", "/usr/local/bin", "/usr/sbin", "/usr/bin"]
BUILTINS = (
    "alias bg bind break builtin caller cd command compgen complete compopt continue "
    "declare dirs disown echo enable eval exec exit export false fc fg getopts hash help "
    "history jobs kill let local logout mapfile popd printf pushd pwd read readarray "
    "readonly return set shift shopt source suspend test times trap true type typeset "
    "ulimit umask unalias unset wait if for while until case select function time coproc"
).split()


def unescape(field: str) -> str:
    return field.encode("latin-1", "backslashreplace").decode("unicode_escape")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("template")
    ap.add_argument("--per-line", type=int, default=12)
    args = ap.parse_args()

    names = set(BUILTINS)
    with open(args.template, encoding="utf-8", errors="surrogateescape") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < 6:
                continue
            path, kind, mode = unescape(fields[0]), fields[1], int(fields[3], 8)
            parent, _, name = path.rpartition("/")
            if parent not in PATH_DIRS or not name:
                continue
            if kind == "link" or (kind == "file" and mode & 0o111):
                names.add(name)

    ok = sorted(n for n in names if all(c.isalnum() or c in "._-+" for c in n))
    for i in range(0, len(ok), args.per_line):
        print("commands = " + " ".join(ok[i:i + args.per_line]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
