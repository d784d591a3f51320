// Keyboard and gamepad to 4-axis mapping in [-1, 1], sampled at 25 Hz.
//
// Excavator-style bindings, one key pair per actuator:
//   turret  a/d     boom  w/s     arm  i/k     bucket  j/l
// Arrow keys mirror the left stick for convenience.

export const KEY_BINDINGS: Record<string, { axis: number; value: number }> = {
  a: { axis: 0, value: -1 },
  d: { axis: 0, value: 1 },
  ArrowLeft: { axis: 0, value: -1 },
  ArrowRight: { axis: 0, value: 1 },
  w: { axis: 1, value: 1 },
  s: { axis: 1, value: -1 },
  ArrowUp: { axis: 1, value: 1 },
  ArrowDown: { axis: 1, value: -1 },
  i: { axis: 2, value: 1 },
  k: { axis: 2, value: -1 },
  j: { axis: 3, value: 1 },
  l: { axis: 3, value: -1 },
};

export const INPUT_RATE_HZ = 25;

/** Tracks held keys; `axes()` returns the current 4-axis sample. */
export class KeyboardAxes {
  private held = new Set<string>();

  keyDown(key: string): void {
    if (key in KEY_BINDINGS) this.held.add(key);
  }

  keyUp(key: string): void {
    this.held.delete(key);
  }

  clear(): void {
    this.held.clear();
  }

  axes(): number[] {
    const out = [0, 0, 0, 0];
    for (const key of this.held) {
      const bind = KEY_BINDINGS[key];
      out[bind.axis] += bind.value;
    }
    return out.map((a) => Math.max(-1, Math.min(1, a)));
  }
}

/** Merges an optional gamepad sample over keyboard axes (pad wins when
 * deflected past a small deadzone). */
export function mergeGamepad(keyboard: number[], pad: number[] | null,
                             deadzone = 0.08): number[] {
  if (!pad) return keyboard;
  return keyboard.map((k, i) => {
    const p = pad[i] ?? 0;
    return Math.abs(p) > deadzone ? Math.max(-1, Math.min(1, p)) : k;
  });
}

/**
 * Fixed-rate input pump: calls `sample` INPUT_RATE_HZ times per second and
 * hands the result to `send`. Returns a stop function.
 */
export function startInputPump(
  sample: () => number[],
  send: (axes: number[]) => void,
  setIntervalFn: typeof setInterval = setInterval,
  clearIntervalFn: typeof clearInterval = clearInterval,
): () => void {
  const handle = setIntervalFn(() => send(sample()), 1000 / INPUT_RATE_HZ);
  return () => clearIntervalFn(handle);
}
