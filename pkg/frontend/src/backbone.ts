/**
 * Feature backbones. A backbone turns a preprocessed image into a fixed
 * length embedding vector.
 *
 * Two families are supported:
 *  - "seeded-projection-512" (default): a fixed seeded random linear
 *    projection of the pixels. Fully offline and bit-deterministic, so
 *    the pipeline and file formats can be exercised without any model
 *    download. Not a learned feature extractor.
 *  - "tfjs:<path/to/model.json>": a TensorFlow.js graph model exported
 *    to disk (e.g. an ImageNet-pretrained ResNet-18 converted with
 *    tensorflowjs_converter). The penultimate 512-dim activations come
 *    out as the model output; spatial outputs are mean-pooled.
 */

import * as fs from 'fs'
import * as path from 'path'
import { RgbaImage, centerCrop, resizeBilinear, toNormalizedRgb } from './image'

export interface Backbone {
  id: string
  featureDim: number
  /** decode -> resize(resizeTo) -> centerCrop(cropTo) -> normalize */
  resizeTo: number
  cropTo: number
  mean: [number, number, number]
  std: [number, number, number]
  embed(batch: Float32Array[]): Promise<Float32Array[]>
}

export function preprocess(img: RgbaImage, backbone: Backbone): Float32Array {
  const resized = resizeBilinear(img, backbone.resizeTo, backbone.resizeTo)
  const cropped = centerCrop(resized, backbone.cropTo)
  return toNormalizedRgb(cropped, backbone.mean, backbone.std)
}

/** xorshift32; fixed seed makes the projection identical across runs. */
function makeRng(seed: number): () => number {
  let state = seed >>> 0 || 1
  return () => {
    state ^= state << 13
    state ^= state >>> 17
    state ^= state << 5
    state >>>= 0
    return state / 0xffffffff
  }
}

const PROJECTION_DIM = 512
const PROJECTION_INPUT = 32

function makeProjectionBackbone(): Backbone {
  const inputLen = PROJECTION_INPUT * PROJECTION_INPUT * 3
  const rng = makeRng(0x5eed)
  const weights = new Float32Array(PROJECTION_DIM * inputLen)
  const scale = 1 / Math.sqrt(inputLen)
  for (let i = 0; i < weights.length; i++) {
    weights[i] = (2 * rng() - 1) * scale
  }
  return {
    id: 'seeded-projection-512',
    featureDim: PROJECTION_DIM,
    resizeTo: PROJECTION_INPUT,
    cropTo: PROJECTION_INPUT,
    mean: [0.5, 0.5, 0.5],
    std: [0.5, 0.5, 0.5],
    async embed(batch) {
      return batch.map(pixels => {
        if (pixels.length !== inputLen) {
          throw new Error(
            `expected ${inputLen} values, got ${pixels.length}`)
        }
        const out = new Float32Array(PROJECTION_DIM)
        for (let j = 0; j < PROJECTION_DIM; j++) {
          let acc = 0
          const row = j * inputLen
          for (let i = 0; i < inputLen; i++) {
            acc += weights[row + i] * pixels[i]
          }
          out[j] = acc
        }
        return out
      })
    },
  }
}

/** Reads a graph-model directory from disk; tf.loadGraphModel has no
 * filesystem handler outside tfjs-node, so assemble the artifacts
 * manually from model.json plus its weight shards. */
async function loadGraphModelFromDisk(tf: any, modelJsonPath: string) {
  const dir = path.dirname(modelJsonPath)
  const manifest = JSON.parse(fs.readFileSync(modelJsonPath, 'utf-8'))
  const weightSpecs: any[] = []
  const shards: Buffer[] = []
  for (const group of manifest.weightsManifest) {
    weightSpecs.push(...group.weights)
    for (const shardPath of group.paths) {
      shards.push(fs.readFileSync(path.join(dir, shardPath)))
    }
  }
  const weightData = Buffer.concat(shards)
  return tf.loadGraphModel({
    load: async () => ({
      modelTopology: manifest.modelTopology,
      format: manifest.format,
      generatedBy: manifest.generatedBy,
      convertedBy: manifest.convertedBy,
      weightSpecs,
      weightData: weightData.buffer.slice(
        weightData.byteOffset,
        weightData.byteOffset + weightData.byteLength),
    }),
  })
}

function makeTfjsBackbone(modelJsonPath: string): Backbone {
  let modelPromise: Promise<any> | null = null
  const cropTo = 224
  return {
    id: `tfjs:${modelJsonPath}`,
    featureDim: 512,
    resizeTo: 256,
    cropTo,
    // ImageNet normalization constants
    mean: [0.485, 0.456, 0.406],
    std: [0.229, 0.224, 0.225],
    async embed(batch) {
      const tf = require('@tensorflow/tfjs')
      if (!modelPromise) {
        modelPromise = loadGraphModelFromDisk(tf, modelJsonPath)
      }
      const model = await modelPromise
      const input = tf.tensor4d(
        batch.flatMap(p => Array.from(p)),
        [batch.length, cropTo, cropTo, 3])
      try {
        let output = model.predict(input)
        if (Array.isArray(output)) output = output[0]
        if (output.rank === 4) {
          output = tf.mean(output, [1, 2]) // pool spatial activations
        }
        const data = await output.data()
        const dim = data.length / batch.length
        this.featureDim = dim
        return batch.map((_, i) =>
          new Float32Array(data.subarray(i * dim, (i + 1) * dim)))
      } finally {
        input.dispose()
      }
    },
  }
}

export function createBackbone(id: string): Backbone {
  if (id === 'seeded-projection-512') {
    return makeProjectionBackbone()
  }
  if (id.startsWith('tfjs:')) {
    return makeTfjsBackbone(id.slice('tfjs:'.length))
  }
  throw new Error(
    `unknown backbone '${id}' (use seeded-projection-512 or ` +
    `tfjs:<path/to/model.json>)`)
}
