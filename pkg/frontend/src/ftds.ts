/**
 * FTDS feature-file writer.
 *
 * Layout (little-endian): magic "FTDS", u32 version = 1, u32 feature_dim,
 * u32 num_classes, u32 domain-name byte length + UTF-8 name, u64 sample
 * count, then per sample a u32 label followed by feature_dim float64
 * values. Backbone activations are float32 and get widened on write.
 */

export const FTDS_MAGIC = 'FTDS'
export const FTDS_VERSION = 1

export interface FtdsSample {
  label: number
  features: Float32Array | Float64Array
}

export function encodeFtds(
  domainName: string,
  numClasses: number,
  featureDim: number,
  samples: FtdsSample[],
): Buffer {
  if (numClasses < 2) {
    throw new Error(`num_classes must be >= 2, got ${numClasses}`)
  }
  if (featureDim < 1) {
    throw new Error(`feature_dim must be >= 1, got ${featureDim}`)
  }
  const name = Buffer.from(domainName, 'utf-8')
  const headerSize = 4 + 12 + 4 + name.length + 8
  const rowSize = 4 + 8 * featureDim
  const buf = Buffer.alloc(headerSize + rowSize * samples.length)

  let off = buf.write(FTDS_MAGIC, 0, 'ascii')
  off = buf.writeUInt32LE(FTDS_VERSION, off)
  off = buf.writeUInt32LE(featureDim, off)
  off = buf.writeUInt32LE(numClasses, off)
  off = buf.writeUInt32LE(name.length, off)
  off += name.copy(buf, off)
  off = Number(buf.writeBigUInt64LE(BigInt(samples.length), off))

  for (const sample of samples) {
    if (!Number.isInteger(sample.label) || sample.label < 0 ||
        sample.label >= numClasses) {
      throw new Error(
        `label ${sample.label} out of range [0, ${numClasses})`)
    }
    if (sample.features.length !== featureDim) {
      throw new Error(
        `feature length ${sample.features.length} != ${featureDim}`)
    }
    off = buf.writeUInt32LE(sample.label, off)
    for (let i = 0; i < featureDim; i++) {
      off = buf.writeDoubleLE(sample.features[i], off)
    }
  }
  return buf
}
