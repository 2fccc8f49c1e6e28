/**
 * The two evaluation stages.
 *
 * Quick validation: instantiate the candidate and run one forward pass on a
 * zero dummy batch of two samples; accept iff the output shape is exactly
 * [2, num_classes].
 *
 * Proxy training: one epoch of SGD (momentum, decoupled weight decay,
 * cosine-annealed learning rate) with random-crop/flip/normalize
 * augmentation, then top-1 accuracy on the held-out test split. With
 * subset_fraction < 1 both splits shrink to a seeded stratified subset.
 */

import * as tf from "@tensorflow/tfjs";

import { CandidateModel, instantiateCandidate } from "./candidate";
import { DataSource, openDataSource, stratifiedIndices } from "./dataset";
import { WorkerReply, WorkerRequest, errorReply, okReply } from "./protocol";
import { Rng, derive, patchGlobalRandom, shuffle } from "./rng";

function errorText(err: unknown): string {
  if (err instanceof Error) {
    const stack = (err.stack ?? "").split("\n").slice(0, 4).join("\n");
    return stack || err.message;
  }
  return String(err);
}

function runForward(model: CandidateModel, batch: tf.Tensor4D): tf.Tensor {
  const out = model.forward(batch);
  if (!(out instanceof tf.Tensor)) {
    throw new Error("forward did not return a tensor");
  }
  return out;
}

export function workerValidate(request: WorkerRequest): WorkerReply {
  const { dataset } = request;
  try {
    const model = instantiateCandidate(request.source_text, dataset);
    const output = tf.tidy(() => {
      const dummy = tf.zeros([2, dataset.input_height, dataset.input_width, dataset.input_channels]);
      return runForward(model, dummy as tf.Tensor4D);
    });
    const shape = output.shape;
    output.dispose();
    const expected = [2, dataset.num_classes];
    if (shape.length !== 2 || shape[0] !== expected[0] || shape[1] !== expected[1]) {
      return errorReply(
        "validation",
        `output shape [${shape.join(", ")}] does not match expected [${expected.join(", ")}]`
      );
    }
    return okReply();
  } catch (err) {
    return errorReply("validation", errorText(err));
  }
}

interface Batch {
  images: tf.Tensor4D;
  labels: tf.Tensor1D;
}

function augment(
  image: Float32Array,
  height: number,
  width: number,
  channels: number,
  request: WorkerRequest,
  rng: Rng
): Float32Array {
  const { random_crop_pad, horizontal_flip, crop_padding } = request.train;
  let out = image;
  if (random_crop_pad && crop_padding > 0) {
    const dy = Math.floor(rng() * (2 * crop_padding + 1)) - crop_padding;
    const dx = Math.floor(rng() * (2 * crop_padding + 1)) - crop_padding;
    const shifted = new Float32Array(out.length);
    for (let y = 0; y < height; y++) {
      const sy = y + dy;
      if (sy < 0 || sy >= height) continue; // zero padding outside the frame
      for (let x = 0; x < width; x++) {
        const sx = x + dx;
        if (sx < 0 || sx >= width) continue;
        for (let c = 0; c < channels; c++) {
          shifted[(y * width + x) * channels + c] = out[(sy * width + sx) * channels + c];
        }
      }
    }
    out = shifted;
  }
  if (horizontal_flip && rng() < 0.5) {
    const flipped = new Float32Array(out.length);
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        for (let c = 0; c < channels; c++) {
          flipped[(y * width + x) * channels + c] = out[(y * width + (width - 1 - x)) * channels + c];
        }
      }
    }
    out = flipped;
  }
  return out;
}

function normalizeInPlace(image: Float32Array, enabled: boolean): Float32Array {
  if (!enabled) {
    return image;
  }
  for (let i = 0; i < image.length; i++) {
    image[i] = (image[i] - 0.5) / 0.5;
  }
  return image;
}

function makeBatch(
  images: Float32Array[],
  labels: number[],
  height: number,
  width: number,
  channels: number
): Batch {
  const flat = new Float32Array(images.length * height * width * channels);
  for (let i = 0; i < images.length; i++) {
    flat.set(images[i], i * height * width * channels);
  }
  return {
    images: tf.tensor4d(flat, [images.length, height, width, channels]),
    labels: tf.tensor1d(labels, "int32"),
  };
}

function trainableVariables(): tf.Variable[] {
  return Object.values(tf.engine().registeredVariables).filter((v) => v.trainable);
}

/** SGD with momentum and decoupled weight decay; velocities owned here. */
class MomentumSgd {
  private velocities = new Map<string, tf.Tensor>();

  constructor(private momentum: number, private weightDecay: number) {}

  step(lossFn: () => tf.Scalar, learningRate: number): number {
    const { value, grads } = tf.variableGrads(lossFn);
    const loss = value.dataSync()[0];
    value.dispose();
    for (const [name, grad] of Object.entries(grads)) {
      const variable = tf.engine().registeredVariables[name];
      const updated = tf.tidy(() => {
        const decayed = this.weightDecay > 0 ? grad.add(variable.mul(this.weightDecay)) : grad;
        const previous = this.velocities.get(name);
        const velocity = previous
          ? previous.mul(this.momentum).add(decayed.mul(learningRate))
          : decayed.mul(learningRate);
        variable.assign(variable.sub(velocity));
        return velocity;
      });
      this.velocities.get(name)?.dispose();
      this.velocities.set(name, tf.keep(updated));
      grad.dispose();
    }
    return loss;
  }

  dispose(): void {
    for (const velocity of this.velocities.values()) {
      velocity.dispose();
    }
    this.velocities.clear();
  }
}

function cosineLearningRate(base: number, step: number, totalSteps: number, enabled: boolean): number {
  if (!enabled || totalSteps <= 1) {
    return base;
  }
  return base * 0.5 * (1 + Math.cos((Math.PI * step) / totalSteps));
}

export function workerTrainEval(request: WorkerRequest): WorkerReply {
  const { dataset, train } = request;
  patchGlobalRandom(request.seed);

  let source: DataSource;
  try {
    source = openDataSource(dataset);
  } catch (err) {
    return errorReply("runtime", errorText(err));
  }

  try {
    const model = instantiateCandidate(request.source_text, dataset);
    // Build weights eagerly so the variable set is fixed before training.
    const warmup = tf.tidy(() =>
      runForward(model, tf.zeros([1, dataset.input_height, dataset.input_width, dataset.input_channels]) as tf.Tensor4D)
    );
    warmup.dispose();
    return trainAndScore(model, source, request);
  } catch (err) {
    return errorReply("runtime", errorText(err));
  }
}

function trainAndScore(model: CandidateModel, source: DataSource, request: WorkerRequest): WorkerReply {
  const { dataset, train } = request;
  const { input_height: height, input_width: width, input_channels: channels } = dataset;

  const trainIndices = stratifiedIndices(
    source.trainCount,
    (i) => source.trainLabel(i),
    dataset.num_classes,
    train.subset_fraction,
    derive(request.seed, 101)
  );
  const testIndices = stratifiedIndices(
    source.testCount,
    (i) => source.testLabel(i),
    dataset.num_classes,
    train.subset_fraction,
    derive(request.seed, 202)
  );

  const orderRng = derive(request.seed, 303);
  const augmentRng = derive(request.seed, 404);
  const optimizer = new MomentumSgd(train.momentum, train.weight_decay);
  const stepsPerEpoch = Math.ceil(trainIndices.length / train.batch_size);
  const totalSteps = stepsPerEpoch * train.epochs;

  let step = 0;
  for (let epoch = 0; epoch < train.epochs; epoch++) {
    const order = shuffle([...trainIndices], orderRng);
    for (let start = 0; start < order.length; start += train.batch_size) {
      const indices = order.slice(start, start + train.batch_size);
      const images = indices.map((i) =>
        normalizeInPlace(augment(source.trainImage(i), height, width, channels, request, augmentRng), train.normalize)
      );
      const labels = indices.map((i) => source.trainLabel(i));
      const batch = makeBatch(images, labels, height, width, channels);
      const learningRate = cosineLearningRate(train.learning_rate, step, totalSteps, train.cosine_annealing);
      try {
        optimizer.step(() => {
          return tf.tidy(() => {
            const logits = runForward(model, batch.images);
            const oneHot = tf.oneHot(batch.labels, dataset.num_classes);
            return tf.losses.softmaxCrossEntropy(oneHot, logits).asScalar();
          });
        }, learningRate);
      } finally {
        batch.images.dispose();
        batch.labels.dispose();
      }
      step += 1;
    }
  }

  let correct = 0;
  for (let start = 0; start < testIndices.length; start += train.batch_size) {
    const indices = testIndices.slice(start, start + train.batch_size);
    const images = indices.map((i) => normalizeInPlace(source.testImage(i), train.normalize));
    const labels = indices.map((i) => source.testLabel(i));
    const batch = makeBatch(images, labels, height, width, channels);
    const predictions = tf.tidy(() => runForward(model, batch.images).argMax(-1).dataSync());
    batch.images.dispose();
    batch.labels.dispose();
    for (let i = 0; i < labels.length; i++) {
      if (predictions[i] === labels[i]) {
        correct += 1;
      }
    }
  }
  optimizer.dispose();
  const accuracy = correct / testIndices.length;
  return okReply(accuracy);
}
