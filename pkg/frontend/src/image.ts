/**
 * Image decoding and preprocessing: PNG/JPEG decode by magic bytes,
 * bilinear resize, center crop, and float conversion with per-channel
 * normalization. No augmentation anywhere; extraction is inference only.
 */

import * as fs from 'fs'
import { PNG } from 'pngjs'
import * as jpeg from 'jpeg-js'

export interface RgbaImage {
  width: number
  height: number
  data: Uint8Array // RGBA, row-major
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47])
const JPEG_MAGIC = Buffer.from([0xff, 0xd8, 0xff])

export function decodeImage(path: string): RgbaImage {
  const raw = fs.readFileSync(path)
  if (raw.subarray(0, 4).equals(PNG_MAGIC)) {
    const png = PNG.sync.read(raw)
    return { width: png.width, height: png.height, data: png.data }
  }
  if (raw.subarray(0, 3).equals(JPEG_MAGIC)) {
    const img = jpeg.decode(raw, { useTArray: true, formatAsRGBA: true })
    return { width: img.width, height: img.height, data: img.data }
  }
  throw new Error(`unsupported image format in ${path}`)
}

export function resizeBilinear(
  img: RgbaImage,
  width: number,
  height: number,
): RgbaImage {
  const out = new Uint8Array(width * height * 4)
  const xScale = img.width / width
  const yScale = img.height / height
  for (let y = 0; y < height; y++) {
    // sample at pixel centers so up- and down-scaling stay symmetric
    const sy = Math.min((y + 0.5) * yScale - 0.5, img.height - 1)
    const y0 = Math.max(Math.floor(sy), 0)
    const y1 = Math.min(y0 + 1, img.height - 1)
    const fy = Math.max(sy - y0, 0)
    for (let x = 0; x < width; x++) {
      const sx = Math.min((x + 0.5) * xScale - 0.5, img.width - 1)
      const x0 = Math.max(Math.floor(sx), 0)
      const x1 = Math.min(x0 + 1, img.width - 1)
      const fx = Math.max(sx - x0, 0)
      for (let c = 0; c < 4; c++) {
        const tl = img.data[(y0 * img.width + x0) * 4 + c]
        const tr = img.data[(y0 * img.width + x1) * 4 + c]
        const bl = img.data[(y1 * img.width + x0) * 4 + c]
        const br = img.data[(y1 * img.width + x1) * 4 + c]
        const top = tl + (tr - tl) * fx
        const bottom = bl + (br - bl) * fx
        out[(y * width + x) * 4 + c] = Math.round(top + (bottom - top) * fy)
      }
    }
  }
  return { width, height, data: out }
}

export function centerCrop(img: RgbaImage, size: number): RgbaImage {
  if (img.width < size || img.height < size) {
    throw new Error(
      `cannot crop ${size}x${size} from ${img.width}x${img.height}`)
  }
  const left = Math.floor((img.width - size) / 2)
  const top = Math.floor((img.height - size) / 2)
  const out = new Uint8Array(size * size * 4)
  for (let y = 0; y < size; y++) {
    const srcStart = ((top + y) * img.width + left) * 4
    out.set(img.data.subarray(srcStart, srcStart + size * 4), y * size * 4)
  }
  return { width: size, height: size, data: out }
}

/** RGBA bytes to normalized HWC float RGB: (v / 255 - mean) / std. */
export function toNormalizedRgb(
  img: RgbaImage,
  mean: [number, number, number],
  std: [number, number, number],
): Float32Array {
  const n = img.width * img.height
  const out = new Float32Array(n * 3)
  for (let i = 0; i < n; i++) {
    for (let c = 0; c < 3; c++) {
      out[i * 3 + c] = (img.data[i * 4 + c] / 255 - mean[c]) / std[c]
    }
  }
  return out
}
