/** CLI entry: start the scoring shim. */

import { loadModel } from "./model.js";
import { createScoreServer } from "./server.js";

interface Args {
  port: number;
  ormModel: string;
  prmModel: string;
  warmupMs: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { port: 9100, ormModel: "stub", prmModel: "stub", warmupMs: 0 };
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${flag}`);
    switch (flag) {
      case "--port":
        args.port = Number(value);
        break;
      case "--orm-model":
        args.ormModel = value;
        break;
      case "--prm-model":
        args.prmModel = value;
        break;
      case "--warmup-ms":
        args.warmupMs = Number(value);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!Number.isInteger(args.port) || args.port < 0 || args.port > 65535) {
    throw new Error(`invalid port ${args.port}`);
  }
  return args;
}

const args = parseArgs(process.argv.slice(2));
const server = createScoreServer({
  ormModel: loadModel(args.ormModel),
  prmModel: loadModel(args.prmModel),
  warmupMs: args.warmupMs,
});
server.listen(args.port, () => {
  const address = server.address();
  const port = typeof address === "object" && address ? address.port : args.port;
  console.log(
    `scorer-shim listening on :${port} (orm=${args.ormModel}, prm=${args.prmModel})`,
  );
});
