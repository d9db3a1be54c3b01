#!/usr/bin/env python3
"""Stand-in SMT solver for the external backend tests.

usage: fake_smt.py MODE [FILE]
  unsat      print unsat
  sat-file   print sat followed by the contents of FILE
  hang       never answer
  garbage    print sat followed by an unreadable model
  echo       copy the query to FILE, then print unsat
"""
import sys
import time

mode = sys.argv[1]
query = sys.stdin.read()
if mode == "unsat":
    print("unsat")
elif mode == "sat-file":
    print("sat")
    with open(sys.argv[2]) as f:
        sys.stdout.write(f.read())
elif mode == "hang":
    time.sleep(3600)
elif mode == "garbage":
    print("sat")
    print("((((define-fun")
elif mode == "echo":
    with open(sys.argv[2], "w") as f:
        f.write(query)
    print("unsat")
else:
    sys.exit(2)
