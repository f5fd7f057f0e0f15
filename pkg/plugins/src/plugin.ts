/**
 * Stream-filter user logic for playback jobs.
 *
 * Usage: node plugin.js <identity|rotate90|count>
 *
 * Reads one BPR1 stream from stdin and writes one to stdout. stdout
 * carries nothing but protocol bytes; diagnostics go to stderr. Exit
 * status is 0 on success and 1 on malformed input or bad usage.
 */

import { MODES } from "./modes";

// a vanished stdout consumer is a normal pipeline event, not a crash
process.stdout.on("error", (err: NodeJS.ErrnoException) => {
  if (err.code !== "EPIPE") {
    process.stderr.write(`${err.message}\n`);
  }
  process.exit(1);
});

async function readStdin(): Promise<Buffer> {
  const chunks: Buffer[] = [];
  for await (const chunk of process.stdin) {
    chunks.push(chunk as Buffer);
  }
  return Buffer.concat(chunks);
}

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  const mode = args.length === 1 ? MODES[args[0]] : undefined;
  if (mode === undefined) {
    process.stderr.write("usage: plugin <identity|rotate90|count>\n");
    return 1;
  }
  const input = await readStdin();
  let output: Buffer;
  try {
    output = mode(input);
  } catch (err) {
    const reason = err instanceof Error ? err.message : String(err);
    process.stderr.write(`${args[0]}: ${reason}\n`);
    return 1;
  }
  process.stdout.write(output);
  return 0;
}

// exit through exitCode so pending stdout/stderr writes drain first
main().then(
  (code) => {
    process.exitCode = code;
  },
  (err) => {
    process.stderr.write(`${err instanceof Error ? err.message : err}\n`);
    process.exitCode = 1;
  },
);
