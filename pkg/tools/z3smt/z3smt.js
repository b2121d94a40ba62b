#!/usr/bin/env node
// Minimal z3 command-line front end backed by the z3 WebAssembly build.
// Accepts the same call shape as the native binary for our purposes:
//   z3smt.js [-smt2] [param=value ...] script.smt2
// Prints the SMT-LIB evaluation output (sat/unsat/unknown, get-value forms)
// on stdout and exits 0 when evaluation completed.

'use strict';

const fs = require('fs');
const { init } = require('z3-solver');

async function main() {
  const params = [];
  let file = null;
  for (const arg of process.argv.slice(2)) {
    if (arg === '-smt2' || arg === '-in') continue;
    const eq = arg.indexOf('=');
    if (eq > 0 && !fs.existsSync(arg)) {
      params.push([arg.slice(0, eq), arg.slice(eq + 1)]);
    } else {
      file = arg;
    }
  }
  if (!file) {
    process.stderr.write('usage: z3smt.js [-smt2] [param=value ...] file.smt2\n');
    process.exit(2);
  }
  const text = fs.readFileSync(file, 'utf8');
  const { Z3 } = await init();
  for (const [k, v] of params) {
    try {
      Z3.global_param_set(k, v);
    } catch (e) {
      process.stderr.write(`ignored parameter ${k}=${v}\n`);
    }
  }
  const ctx = Z3.mk_context(Z3.mk_config());
  const out = await Z3.eval_smtlib2_string(ctx, text);
  process.stdout.write(out.endsWith('\n') ? out : out + '\n');
  process.exit(0);
}

main().catch((e) => {
  process.stderr.write(String(e && e.stack ? e.stack : e) + '\n');
  process.exit(1);
});
