/**
 * Candidate loading: the source text must define `class Net` with a
 * constructor taking the dataset description and a `forward` method mapping
 * a [batch, height, width, channels] tensor to [batch, num_classes] logits.
 *
 * The source runs in a fresh module namespace (a vm context exposing the ML
 * runtime and little else). Containment comes from the per-evaluation
 * subprocess and its timeout; this is not a security sandbox against
 * deliberately malicious code.
 */

import * as vm from "vm";

import * as tf from "@tensorflow/tfjs";

import { DatasetSpec } from "./protocol";

export interface CandidateModel {
  forward(x: tf.Tensor4D): tf.Tensor;
}

export interface CandidateDatasetInfo {
  inputChannels: number;
  inputHeight: number;
  inputWidth: number;
  numClasses: number;
}

export function datasetInfo(spec: DatasetSpec): CandidateDatasetInfo {
  return {
    inputChannels: spec.input_channels,
    inputHeight: spec.input_height,
    inputWidth: spec.input_width,
    numClasses: spec.num_classes,
  };
}

export function instantiateCandidate(sourceText: string, spec: DatasetSpec): CandidateModel {
  const sandbox: Record<string, unknown> = {
    tf,
    Math,
    console: { log: console.error, warn: console.error, error: console.error },
  };
  const context = vm.createContext(sandbox);
  const script = new vm.Script(`${sourceText}\n;Net`, { filename: "candidate.js" });
  const netClass = script.runInContext(context, { timeout: 60_000 });
  if (typeof netClass !== "function") {
    throw new Error("source does not define a class named Net");
  }
  const model = new netClass(datasetInfo(spec));
  if (typeof model.forward !== "function") {
    throw new Error("Net instance has no forward method");
  }
  return model as CandidateModel;
}
