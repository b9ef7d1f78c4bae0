/**
 * Entry point. Default transport is stdio; --tcp <port> listens on
 * localhost instead (one session per connection).
 */
import net from "node:net";
import { serve } from "./server";

async function main(): Promise<void> {
  const args = process.argv.slice(2);
  const tcpIndex = args.indexOf("--tcp");
  if (tcpIndex >= 0) {
    const port = Number(args[tcpIndex + 1] ?? 0);
    // allowHalfOpen: clients may finish sending and still await responses
    const server = net.createServer({ allowHalfOpen: true }, (socket) => {
      serve(socket, socket).finally(() => socket.end());
    });
    server.listen(port, "127.0.0.1", () => {
      const addr = server.address();
      if (addr && typeof addr === "object") {
        process.stderr.write(`listening on 127.0.0.1:${addr.port}\n`);
      }
    });
    return;
  }
  await serve(process.stdin, process.stdout);
}

main().catch((exc) => {
  process.stderr.write(`fatal: ${exc}\n`);
  process.exit(1);
});
