"""Protocol fixture: replies with something that is not JSON."""
import sys

sys.stdin.read()
print("accuracy is like, pretty good?")
