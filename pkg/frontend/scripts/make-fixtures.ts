/**
 * Generates the committed test fixture: a two-class image folder with
 * three PNGs per class, used by the vitest suite and by the downstream
 * conformance test. Deterministic, so regeneration is idempotent.
 */

import * as fs from 'fs'
import * as path from 'path'
import { PNG } from 'pngjs'

const FIXTURE_DIR = path.join(__dirname, '..', '..', 'test', 'fixtures',
                              'two-class')

function writePng(filePath: string, size: number,
                  pixel: (x: number, y: number) => [number, number, number]) {
  const png = new PNG({ width: size, height: size })
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const [r, g, b] = pixel(x, y)
      const i = (y * size + x) * 4
      png.data[i] = r
      png.data[i + 1] = g
      png.data[i + 2] = b
      png.data[i + 3] = 255
    }
  }
  fs.writeFileSync(filePath, PNG.sync.write(png))
}

function main() {
  const discs = path.join(FIXTURE_DIR, 'discs')
  const stripes = path.join(FIXTURE_DIR, 'stripes')
  fs.mkdirSync(discs, { recursive: true })
  fs.mkdirSync(stripes, { recursive: true })

  const sizes = [40, 48, 64]
  sizes.forEach((size, i) => {
    // red disc on dark background, radius varies per image
    const radius = size * (0.25 + 0.08 * i)
    writePng(path.join(discs, `disc${i}.png`), size, (x, y) => {
      const dx = x - size / 2
      const dy = y - size / 2
      const inside = dx * dx + dy * dy < radius * radius
      return inside ? [220, 40 + 20 * i, 30] : [25, 25, 30]
    })
    // blue horizontal stripes, stripe width varies per image
    const period = 4 + 2 * i
    writePng(path.join(stripes, `stripe${i}.png`), size, (_x, y) => {
      const on = Math.floor(y / period) % 2 === 0
      return on ? [30, 60 + 15 * i, 215] : [235, 235, 230]
    })
  })
  console.log(`fixtures written to ${FIXTURE_DIR}`)
}

main()
