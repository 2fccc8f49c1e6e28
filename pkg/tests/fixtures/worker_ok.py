"""Protocol fixture: validates anything, trains to a fixed accuracy."""
import json
import sys

request = json.loads(sys.stdin.read())
if request["request_kind"] == "validate":
    reply = {"protocol_version": "1", "status": "ok"}
else:
    reply = {"protocol_version": "1", "status": "ok", "accuracy": 0.42}
print(json.dumps(reply))
