#!/usr/bin/env node
/**
 * CLI: maskshift-extract extract --input <dir> --domain <name>
 *        --out <file> [--backbone <id>] [--batch-size N]
 *
 * Writes <out> (FTDS) and <out>.manifest.json (class mapping, counts,
 * skipped files). Exit codes: 0 ok, 2 usage error, 1 extraction error.
 */

import { parseArgs } from 'node:util'
import { extract } from './extract'

const USAGE =
  'usage: maskshift-extract extract --input <dir> --domain <name> ' +
  '--out <file> [--backbone <id>] [--batch-size N]'

async function main(argv: string[]): Promise<number> {
  if (argv[0] !== 'extract') {
    console.error(USAGE)
    return 2
  }
  let values
  try {
    values = parseArgs({
      args: argv.slice(1),
      options: {
        input: { type: 'string' },
        domain: { type: 'string' },
        out: { type: 'string' },
        backbone: { type: 'string', default: 'seeded-projection-512' },
        'batch-size': { type: 'string', default: '16' },
      },
    }).values
  } catch (err) {
    console.error(`${(err as Error).message}\n${USAGE}`)
    return 2
  }
  if (!values.input || !values.domain || !values.out) {
    console.error(USAGE)
    return 2
  }
  const batchSize = Number(values['batch-size'])
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    console.error(`invalid --batch-size ${values['batch-size']}`)
    return 2
  }

  try {
    const manifest = await extract({
      inputDir: values.input,
      domain: values.domain,
      outPath: values.out,
      backbone: values.backbone,
      batchSize,
    })
    console.log(
      `wrote ${values.out}: ${manifest.total_samples} samples, ` +
      `${manifest.num_classes} classes, dim ${manifest.feature_dim} ` +
      `(${manifest.skipped.length} skipped)`)
    return 0
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
}

main(process.argv.slice(2)).then(code => {
  process.exitCode = code
})
