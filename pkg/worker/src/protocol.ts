/**
 * Wire protocol, version 1: one JSON request on stdin, one JSON reply on
 * stdout, nothing else on stdout. Mirrors docs/worker_protocol.schema.json
 * at the repository root.
 */

export const PROTOCOL_VERSION = "1";

export interface DatasetSpec {
  name: string;
  input_channels: number;
  input_height: number;
  input_width: number;
  num_classes: number;
  task_description: string;
}

export interface TrainSettings {
  epochs: number;
  momentum: number;
  weight_decay: number;
  learning_rate: number;
  cosine_annealing: boolean;
  batch_size: number;
  random_crop_pad: boolean;
  horizontal_flip: boolean;
  normalize: boolean;
  crop_padding: number;
  subset_fraction: number;
}

export interface WorkerRequest {
  protocol_version: string;
  request_kind: "validate" | "train_eval";
  source_text: string;
  dataset: DatasetSpec;
  train: TrainSettings;
  seed: number;
}

export interface WorkerReply {
  protocol_version: string;
  status: "ok" | "error";
  accuracy?: number;
  error_kind?: "validation" | "runtime";
  message?: string;
}

export function okReply(accuracy?: number): WorkerReply {
  const reply: WorkerReply = { protocol_version: PROTOCOL_VERSION, status: "ok" };
  if (accuracy !== undefined) {
    reply.accuracy = accuracy;
  }
  return reply;
}

export function errorReply(kind: "validation" | "runtime", message: string): WorkerReply {
  return {
    protocol_version: PROTOCOL_VERSION,
    status: "error",
    error_kind: kind,
    message,
  };
}

function expectNumber(value: unknown, field: string): number {
  if (typeof value !== "number" || Number.isNaN(value)) {
    throw new Error(`request field ${field} must be a number`);
  }
  return value;
}

function expectString(value: unknown, field: string): string {
  if (typeof value !== "string") {
    throw new Error(`request field ${field} must be a string`);
  }
  return value;
}

function expectBoolean(value: unknown, field: string): boolean {
  if (typeof value !== "boolean") {
    throw new Error(`request field ${field} must be a boolean`);
  }
  return value;
}

export function parseRequest(text: string): WorkerRequest {
  let raw: any;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new Error(`request is not valid JSON: ${err}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new Error("request must be a JSON object");
  }
  if (raw.protocol_version !== PROTOCOL_VERSION) {
    throw new Error(`unsupported protocol_version ${JSON.stringify(raw.protocol_version)}`);
  }
  if (raw.request_kind !== "validate" && raw.request_kind !== "train_eval") {
    throw new Error(`unknown request_kind ${JSON.stringify(raw.request_kind)}`);
  }
  const source = expectString(raw.source_text, "source_text");
  if (source.length === 0) {
    throw new Error("source_text must be non-empty");
  }
  const d = raw.dataset ?? {};
  const dataset: DatasetSpec = {
    name: expectString(d.name, "dataset.name"),
    input_channels: expectNumber(d.input_channels, "dataset.input_channels"),
    input_height: expectNumber(d.input_height, "dataset.input_height"),
    input_width: expectNumber(d.input_width, "dataset.input_width"),
    num_classes: expectNumber(d.num_classes, "dataset.num_classes"),
    task_description: expectString(d.task_description ?? "", "dataset.task_description"),
  };
  const t = raw.train ?? {};
  const train: TrainSettings = {
    epochs: expectNumber(t.epochs ?? 1, "train.epochs"),
    momentum: expectNumber(t.momentum ?? 0.9, "train.momentum"),
    weight_decay: expectNumber(t.weight_decay ?? 5e-4, "train.weight_decay"),
    learning_rate: expectNumber(t.learning_rate ?? 0.01, "train.learning_rate"),
    cosine_annealing: expectBoolean(t.cosine_annealing ?? true, "train.cosine_annealing"),
    batch_size: expectNumber(t.batch_size ?? 128, "train.batch_size"),
    random_crop_pad: expectBoolean(t.random_crop_pad ?? true, "train.random_crop_pad"),
    horizontal_flip: expectBoolean(t.horizontal_flip ?? true, "train.horizontal_flip"),
    normalize: expectBoolean(t.normalize ?? true, "train.normalize"),
    crop_padding: expectNumber(t.crop_padding ?? 4, "train.crop_padding"),
    subset_fraction: expectNumber(t.subset_fraction ?? 1.0, "train.subset_fraction"),
  };
  if (train.subset_fraction <= 0 || train.subset_fraction > 1) {
    throw new Error("train.subset_fraction must be in (0, 1]");
  }
  return {
    protocol_version: PROTOCOL_VERSION,
    request_kind: raw.request_kind,
    source_text: source,
    dataset,
    train,
    seed: expectNumber(raw.seed ?? 43, "seed"),
  };
}
