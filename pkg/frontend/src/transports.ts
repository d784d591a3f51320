// LineTransport implementations: raw TCP for Node (tests, headless drivers)
// and WebSocket for the browser (via the bundled ws-to-tcp bridge).

import { LineSplitter, type LineTransport } from "./protocol.js";

export class TcpTransport implements LineTransport {
  private splitter = new LineSplitter();
  private lineHandler: (line: string) => void = () => {};
  private closeHandler: () => void = () => {};
  private sock: import("net").Socket;

  private constructor(sock: import("net").Socket) {
    this.sock = sock;
    sock.setEncoding("utf-8");
    sock.on("data", (chunk: string) =>
      this.splitter.push(chunk, (line) => this.lineHandler(line)),
    );
    sock.on("close", () => this.closeHandler());
    sock.on("error", () => this.closeHandler());
  }

  static async connect(host: string, port: number): Promise<TcpTransport> {
    const net = await import("net");
    const sock = net.createConnection({ host, port });
    await new Promise<void>((resolve, reject) => {
      sock.once("connect", resolve);
      sock.once("error", reject);
    });
    return new TcpTransport(sock);
  }

  send(line: string): void {
    this.sock.write(line + "\n");
  }

  onLine(handler: (line: string) => void): void {
    this.lineHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.sock.end();
  }
}

/** Browser side: each WebSocket text frame carries one protocol line. */
export class WebSocketTransport implements LineTransport {
  private splitter = new LineSplitter();
  private lineHandler: (line: string) => void = () => {};
  private closeHandler: () => void = () => {};

  constructor(private ws: WebSocket) {
    ws.onmessage = (event) => {
      this.splitter.push(String(event.data) + "\n", (line) =>
        this.lineHandler(line),
      );
    };
    ws.onclose = () => this.closeHandler();
    ws.onerror = () => this.closeHandler();
  }

  static connect(url: string): Promise<WebSocketTransport> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(url);
      ws.onopen = () => resolve(new WebSocketTransport(ws));
      ws.onerror = (err) => reject(err);
    });
  }

  send(line: string): void {
    this.ws.send(line);
  }

  onLine(handler: (line: string) => void): void {
    this.lineHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.ws.close();
  }
}
