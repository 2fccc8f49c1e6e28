/**
 * Training data access: the standard CIFAR-10 binary batches when present in
 * the local data directory, otherwise a deterministic synthetic surrogate.
 *
 * The surrogate generates class-structured images on demand (fixed internal
 * seed, independent of the training seed): each class is a smooth sinusoidal
 * template plus per-image noise, learnable above chance by a small CNN within
 * one epoch. It exists so smoke tests run hermetically on machines without
 * the dataset; real runs should mount the data directory.
 *
 * Images are H*W*C row-major Float32Array in [0, 1].
 */

import * as fs from "fs";
import * as path from "path";

import { DatasetSpec } from "./protocol";
import { Rng, derive, mulberry32, shuffle } from "./rng";

export const DATA_DIR_ENV = "ARCHLOOP_DATA_DIR";
export const SYNTHETIC_FALLBACK_ENV = "ARCHLOOP_SYNTHETIC_DATA";

// Official archive checksum (cifar-10-binary.tar.gz), for provenance checks
// when populating the data directory.
export const CIFAR10_ARCHIVE_MD5 = "c32a1d4ab5d03f1284b67883e8d87530";

const CIFAR_BATCH_BYTES = 30_730_000; // 10000 records of (1 label + 3072 pixels)
const CIFAR_RECORD_BYTES = 3073;

const SURROGATE_SEED = 0xda7a5e7;

export interface DataSource {
  trainCount: number;
  testCount: number;
  trainLabel(index: number): number;
  testLabel(index: number): number;
  trainImage(index: number): Float32Array;
  testImage(index: number): Float32Array;
}

class CifarBinarySource implements DataSource {
  readonly trainCount: number;
  readonly testCount: number;
  private trainBuffers: Buffer[];
  private testBuffer: Buffer;
  private numClasses: number;

  constructor(dir: string, numClasses: number) {
    this.numClasses = numClasses;
    this.trainBuffers = [];
    for (let i = 1; i <= 5; i++) {
      this.trainBuffers.push(readBatchFile(path.join(dir, `data_batch_${i}.bin`)));
    }
    this.testBuffer = readBatchFile(path.join(dir, "test_batch.bin"));
    this.trainCount = 50_000;
    this.testCount = 10_000;
  }

  private record(split: "train" | "test", index: number): Buffer {
    if (split === "train") {
      const buffer = this.trainBuffers[Math.floor(index / 10_000)];
      const offset = (index % 10_000) * CIFAR_RECORD_BYTES;
      return buffer.subarray(offset, offset + CIFAR_RECORD_BYTES);
    }
    const offset = index * CIFAR_RECORD_BYTES;
    return this.testBuffer.subarray(offset, offset + CIFAR_RECORD_BYTES);
  }

  private label(split: "train" | "test", index: number): number {
    const label = this.record(split, index)[0];
    if (label >= this.numClasses) {
      throw new Error(`corrupt dataset: label ${label} out of range at ${split}[${index}]`);
    }
    return label;
  }

  private image(split: "train" | "test", index: number): Float32Array {
    // Records store channel-planar bytes (R plane, G plane, B plane); emit
    // interleaved H*W*C floats.
    const record = this.record(split, index);
    const out = new Float32Array(32 * 32 * 3);
    for (let pixel = 0; pixel < 1024; pixel++) {
      for (let channel = 0; channel < 3; channel++) {
        out[pixel * 3 + channel] = record[1 + channel * 1024 + pixel] / 255;
      }
    }
    return out;
  }

  trainLabel(index: number): number {
    return this.label("train", index);
  }

  testLabel(index: number): number {
    return this.label("test", index);
  }

  trainImage(index: number): Float32Array {
    return this.image("train", index);
  }

  testImage(index: number): Float32Array {
    return this.image("test", index);
  }
}

function readBatchFile(file: string): Buffer {
  const buffer = fs.readFileSync(file);
  if (buffer.length !== CIFAR_BATCH_BYTES) {
    throw new Error(`corrupt dataset: ${file} is ${buffer.length} bytes, expected ${CIFAR_BATCH_BYTES}`);
  }
  return buffer;
}

class SyntheticSource implements DataSource {
  readonly trainCount: number;
  readonly testCount: number;
  private spec: DatasetSpec;
  private templates: Float32Array[];

  constructor(spec: DatasetSpec, trainPerClass = 5000, testPerClass = 1000) {
    this.spec = spec;
    this.trainCount = trainPerClass * spec.num_classes;
    this.testCount = testPerClass * spec.num_classes;
    this.templates = [];
    for (let cls = 0; cls < spec.num_classes; cls++) {
      this.templates.push(this.makeTemplate(cls));
    }
  }

  private makeTemplate(cls: number): Float32Array {
    // Each class is a distinct hue tint (shift-and-flip invariant, so it
    // survives the augmentation pipeline) over a class-specific smooth
    // texture. A few SGD steps suffice to separate the tints, which is what
    // makes one-epoch smoke tests meaningful at tiny subset sizes.
    const { input_height: h, input_width: w, input_channels: c } = this.spec;
    const rng = derive(SURROGATE_SEED, cls + 1);
    const angle = (2 * Math.PI * cls) / this.spec.num_classes;
    const tint: number[] = [];
    for (let channel = 0; channel < c; channel++) {
      tint.push(Math.cos(angle + (2 * Math.PI * channel) / Math.max(3, c)));
    }
    const out = new Float32Array(h * w * c);
    for (let channel = 0; channel < c; channel++) {
      const fx = 0.15 + rng() * 0.55;
      const fy = 0.15 + rng() * 0.55;
      const px = rng() * Math.PI * 2;
      const py = rng() * Math.PI * 2;
      for (let y = 0; y < h; y++) {
        for (let x = 0; x < w; x++) {
          const texture = 0.15 * Math.sin(fx * x + px) * Math.cos(fy * y + py);
          out[(y * w + x) * c + channel] = 0.5 + 0.35 * tint[channel] + texture;
        }
      }
    }
    return out;
  }

  private labelOf(index: number): number {
    return index % this.spec.num_classes;
  }

  private image(splitTag: number, index: number): Float32Array {
    const template = this.templates[this.labelOf(index)];
    const rng = derive(SURROGATE_SEED ^ splitTag, index + 1);
    const out = new Float32Array(template.length);
    for (let i = 0; i < out.length; i++) {
      // Box-Muller gaussian noise around the class template.
      const u = Math.max(rng(), 1e-12);
      const v = rng();
      const noise = Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
      out[i] = Math.min(1, Math.max(0, template[i] + 0.06 * noise));
    }
    return out;
  }

  trainLabel(index: number): number {
    return this.labelOf(index);
  }

  testLabel(index: number): number {
    return this.labelOf(index);
  }

  trainImage(index: number): Float32Array {
    return this.image(0x7e57, index);
  }

  testImage(index: number): Float32Array {
    return this.image(0x7e57ab1e, index);
  }
}

export function cifarDataDir(): string | null {
  const root = process.env[DATA_DIR_ENV];
  if (!root) {
    return null;
  }
  const direct = path.join(root, "data_batch_1.bin");
  if (fs.existsSync(direct)) {
    return root;
  }
  const nested = path.join(root, "cifar-10-batches-bin");
  if (fs.existsSync(path.join(nested, "data_batch_1.bin"))) {
    return nested;
  }
  return null;
}

export function openDataSource(spec: DatasetSpec): DataSource {
  if (spec.name === "CIFAR-10") {
    const dir = cifarDataDir();
    if (dir !== null) {
      return new CifarBinarySource(dir, spec.num_classes);
    }
    if (process.env[SYNTHETIC_FALLBACK_ENV] !== "1") {
      throw new Error(
        `CIFAR-10 binaries not found (set ${DATA_DIR_ENV} to the directory holding ` +
          `data_batch_*.bin, or set ${SYNTHETIC_FALLBACK_ENV}=1 to use the synthetic surrogate)`
      );
    }
  }
  return new SyntheticSource(spec);
}

/**
 * Seeded stratified subset: per class, a seeded shuffle of that class's
 * indices, keeping ceil(fraction * classCount) of each so class balance is
 * preserved and chance-level baselines stay meaningful.
 */
export function stratifiedIndices(
  count: number,
  labelOf: (index: number) => number,
  numClasses: number,
  fraction: number,
  rng: Rng
): number[] {
  if (fraction >= 1.0) {
    return Array.from({ length: count }, (_, i) => i);
  }
  const byClass: number[][] = Array.from({ length: numClasses }, () => []);
  for (let i = 0; i < count; i++) {
    byClass[labelOf(i)].push(i);
  }
  const chosen: number[] = [];
  for (const indices of byClass) {
    shuffle(indices, rng);
    const keep = Math.ceil(indices.length * fraction);
    chosen.push(...indices.slice(0, keep));
  }
  return chosen.sort((a, b) => a - b);
}
