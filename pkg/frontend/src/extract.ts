/**
 * Walks an image-folder dataset (one subdirectory per class), embeds
 * every decodable image with the chosen backbone, and writes an FTDS
 * feature file plus a JSON manifest sidecar.
 *
 * Class subfolder names map to label indices by lexicographic sort; the
 * mapping lands in the manifest so downstream consumers never have to
 * re-derive it. Undecodable images are skipped with a warning and
 * counted; an empty class is a hard error.
 */

import * as fs from 'fs'
import * as path from 'path'
import { Backbone, createBackbone, preprocess } from './backbone'
import { decodeImage } from './image'
import { FtdsSample, encodeFtds } from './ftds'

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

export interface ExtractJob {
  inputDir: string
  domain: string
  outPath: string
  backbone?: string
  batchSize?: number
  log?: (message: string) => void
}

export interface ExtractManifest {
  domain: string
  backbone: string
  feature_dim: number
  num_classes: number
  classes: Record<string, number>
  counts: Record<string, number>
  skipped: string[]
  total_samples: number
}

function listClassDirs(inputDir: string): string[] {
  if (!fs.existsSync(inputDir) || !fs.statSync(inputDir).isDirectory()) {
    throw new Error(`input directory not found: ${inputDir}`)
  }
  const dirs = fs
    .readdirSync(inputDir, { withFileTypes: true })
    .filter(entry => entry.isDirectory())
    .map(entry => entry.name)
    .sort()
  if (dirs.length < 1) {
    throw new Error(`no class subfolders in ${inputDir}`)
  }
  return dirs
}

function listImages(classDir: string): string[] {
  return fs
    .readdirSync(classDir)
    .filter(name => IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase()))
    .sort()
    .map(name => path.join(classDir, name))
}

export async function extract(job: ExtractJob): Promise<ExtractManifest> {
  const log = job.log ?? ((message: string) => console.warn(message))
  const backbone: Backbone = createBackbone(
    job.backbone ?? 'seeded-projection-512')
  const batchSize = job.batchSize ?? 16
  if (batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${batchSize}`)
  }

  const classDirs = listClassDirs(job.inputDir)
  const classes: Record<string, number> = {}
  classDirs.forEach((name, index) => {
    classes[name] = index
  })

  const samples: FtdsSample[] = []
  const counts: Record<string, number> = {}
  const skipped: string[] = []

  for (const className of classDirs) {
    const label = classes[className]
    const images = listImages(path.join(job.inputDir, className))
    const pending: Float32Array[] = []

    const flush = async () => {
      const embedded = await backbone.embed(pending.splice(0))
      for (const features of embedded) {
        samples.push({ label, features })
      }
    }

    for (const imagePath of images) {
      try {
        pending.push(preprocess(decodeImage(imagePath), backbone))
      } catch (err) {
        log(`skipping ${imagePath}: ${(err as Error).message}`)
        skipped.push(imagePath)
        continue
      }
      if (pending.length >= batchSize) {
        await flush()
      }
    }
    await flush()

    counts[className] = images.length - skipped.filter(p =>
      p.startsWith(path.join(job.inputDir, className) + path.sep)).length
    if (counts[className] === 0) {
      throw new Error(`class '${className}' has no decodable images`)
    }
  }

  const buf = encodeFtds(job.domain, classDirs.length,
                         backbone.featureDim, samples)
  fs.writeFileSync(job.outPath, buf)

  const manifest: ExtractManifest = {
    domain: job.domain,
    backbone: backbone.id,
    feature_dim: backbone.featureDim,
    num_classes: classDirs.length,
    classes,
    counts,
    skipped,
    total_samples: samples.length,
  }
  fs.writeFileSync(`${job.outPath}.manifest.json`,
                   JSON.stringify(manifest, null, 2) + '\n')
  return manifest
}
