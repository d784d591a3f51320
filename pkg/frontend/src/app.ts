// Browser entry point. Query parameters select the bridge address and the
// instruction style:  index.html?server=ws://localhost:8765&style=bars

import { paint } from "./canvas.js";
import { KeyboardAxes, mergeGamepad, startInputPump } from "./input.js";
import { ProtocolSession, type Style } from "./protocol.js";
import { renderHud, renderInstruction, renderScene } from "./render.js";
import { WebSocketTransport } from "./transports.js";

function queryParam(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

export async function start(): Promise<void> {
  const server = queryParam("server", "ws://127.0.0.1:8765");
  const styleParam = queryParam("style", "bars");
  const style: Style = (["bars", "circles", "none"] as const).includes(
    styleParam as Style,
  )
    ? (styleParam as Style)
    : "circles";

  const scene = document.getElementById("scene") as HTMLCanvasElement;
  const overlay = document.getElementById("overlay") as HTMLCanvasElement;
  const sceneCtx = scene.getContext("2d")!;
  const overlayCtx = overlay.getContext("2d")!;

  const keyboard = new KeyboardAxes();
  window.addEventListener("keydown", (e) => keyboard.keyDown(e.key));
  window.addEventListener("keyup", (e) => keyboard.keyUp(e.key));
  window.addEventListener("blur", () => keyboard.clear());

  let lastAxes = [0, 0, 0, 0];
  const transport = await WebSocketTransport.connect(server);
  const session = new ProtocolSession(transport, style);

  const stopPump = startInputPump(
    () => {
      const pads = navigator.getGamepads ? navigator.getGamepads() : [];
      const pad = pads && pads[0] ? Array.from(pads[0].axes) : null;
      lastAxes = mergeGamepad(keyboard.axes(), pad);
      return lastAxes;
    },
    (axes) => {
      if (session.live) session.sendAxes(axes);
    },
  );

  window.addEventListener("beforeunload", () => {
    stopPump();
    session.end();
  });

  function frame(): void {
    const view = session.view;
    sceneCtx.clearRect(0, 0, scene.width, scene.height);
    overlayCtx.clearRect(0, 0, overlay.width, overlay.height);
    // render only after the hello acknowledgement arrived
    if (view.state) {
      paint(sceneCtx, renderScene(view.state));
      paint(overlayCtx, renderInstruction(view.instruction, lastAxes, view.style));
    }
    paint(overlayCtx, renderHud(view));
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

start().catch((err) => {
  const el = document.getElementById("status");
  if (el) el.textContent = `connection failed: ${err}`;
});
