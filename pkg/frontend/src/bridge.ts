// WebSocket-to-TCP bridge: browsers cannot open raw sockets, so each
// WebSocket connection here gets its own TCP session to the instruction
// service; text frames map one-to-one onto protocol lines.
//
//   node dist/bridge.js [--listen 8765] [--server 127.0.0.1:7373]

import net from "net";
import { WebSocketServer, type WebSocket } from "ws";

function arg(name: string, fallback: string): string {
  const idx = process.argv.indexOf(`--${name}`);
  return idx >= 0 && process.argv[idx + 1] ? process.argv[idx + 1] : fallback;
}

const listenPort = Number(arg("listen", "8765"));
const [host, portText] = arg("server", "127.0.0.1:7373").split(":");
const serverPort = Number(portText);

const wss = new WebSocketServer({ port: listenPort });
console.log(`bridge: ws://0.0.0.0:${listenPort} -> tcp ${host}:${serverPort}`);

wss.on("connection", (ws: WebSocket) => {
  const sock = net.createConnection({ host, port: serverPort });
  sock.setEncoding("utf-8");
  let buffer = "";

  sock.on("data", (chunk: string) => {
    buffer += chunk;
    let idx: number;
    while ((idx = buffer.indexOf("\n")) >= 0) {
      const line = buffer.slice(0, idx);
      buffer = buffer.slice(idx + 1);
      if (line.trim()) ws.send(line);
    }
  });
  sock.on("close", () => ws.close());
  sock.on("error", () => ws.close());

  ws.on("message", (data) => sock.write(data.toString() + "\n"));
  ws.on("close", () => sock.end());
  ws.on("error", () => sock.end());
});
