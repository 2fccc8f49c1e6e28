/**
 * Worker entry point: read one JSON request from stdin, write one JSON reply
 * to stdout, exit. All diagnostics go to stderr; stdout carries nothing but
 * the reply document. One request per process invocation keeps every
 * evaluation state-clean.
 */

import "./stdio_guard"; // must load before the ML runtime

import { workerTrainEval, workerValidate } from "./evaluate";
import { WorkerReply, errorReply, parseRequest } from "./protocol";
import { patchGlobalRandom } from "./rng";

function readStdin(): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    process.stdin.on("data", (chunk) => chunks.push(chunk));
    process.stdin.on("end", () => resolve(Buffer.concat(chunks).toString("utf-8")));
    process.stdin.on("error", reject);
  });
}

function writeReply(reply: WorkerReply): void {
  process.stdout.write(JSON.stringify(reply) + "\n");
}

async function main(): Promise<void> {
  const text = await readStdin();
  let reply: WorkerReply;
  try {
    const request = parseRequest(text);
    patchGlobalRandom(request.seed);
    if (process.env.ARCHLOOP_SCRATCH_DIR) {
      process.chdir(process.env.ARCHLOOP_SCRATCH_DIR);
    }
    reply = request.request_kind === "validate" ? workerValidate(request) : workerTrainEval(request);
  } catch (err) {
    reply = errorReply("runtime", err instanceof Error ? err.message : String(err));
  }
  writeReply(reply);
}

main().catch((err) => {
  console.error("worker fatal:", err);
  process.exit(1);
});
