/** Interactive segmentation UI.
 *
 * One uploaded image, two live panels (depth-aware and RGB-only variants of
 * the same checkpoint), click-to-refine prompts.  Every service call sends
 * the full click history; the client owns undo and replay.
 */

import { ApiError, Client, VARIANTS } from "./api.js";
import type { SegmentResult, Variant } from "./api.js";
import { composeOverlay, drawClickMarkers } from "./overlay.js";
import type { RgbaBuffer } from "./overlay.js";
import { decodeRleString } from "./rle.js";
import {
  clearSavedSession,
  clicksToPrompts,
  loadSession,
  saveSession,
  Session,
} from "./state.js";
import type { Click, KeyValueStore } from "./state.js";

export interface AppOptions {
  root: HTMLElement;
  apiBase?: string;
  fetchFn?: typeof fetch;
  storage?: KeyValueStore;
  /** Pixel access for uploaded files; overridden in tests where the DOM
   * cannot rasterize PNGs. */
  decodeFile?: (file: File) => Promise<RgbaBuffer>;
  decodeB64?: (b64: string) => Promise<RgbaBuffer>;
}

async function fileToB64(file: File): Promise<string> {
  const url: string = await new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => resolve(reader.result as string);
    reader.readAsDataURL(file);
  });
  const comma = url.indexOf(",");
  return url.slice(comma + 1);
}

function b64ToDataUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

/** Browser-path pixel decode: rasterize through an offscreen canvas. */
async function decodeViaCanvas(url: string): Promise<RgbaBuffer> {
  const img = new Image();
  await new Promise<void>((resolve, reject) => {
    img.onload = () => resolve();
    img.onerror = () => reject(new Error("image failed to decode"));
    img.src = url;
  });
  const canvas = document.createElement("canvas");
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unavailable");
  ctx.drawImage(img, 0, 0);
  const data = ctx.getImageData(0, 0, canvas.width, canvas.height);
  return { data: data.data, width: data.width, height: data.height };
}

function blit(canvas: HTMLCanvasElement, buffer: RgbaBuffer): void {
  canvas.width = buffer.width;
  canvas.height = buffer.height;
  const ctx = canvas.getContext("2d") as CanvasRenderingContext2D | null;
  if (!ctx) return;
  if (typeof ImageData !== "undefined") {
    const data = buffer.data as unknown as ConstructorParameters<typeof ImageData>[0];
    ctx.putImageData(new ImageData(data, buffer.width, buffer.height), 0, 0);
  } else {
    // Recording contexts in tests take the raw buffer shape.
    (ctx as unknown as { putImageData(d: object, x: number, y: number): void }).putImageData(
      { data: buffer.data, width: buffer.width, height: buffer.height },
      0,
      0,
    );
  }
}

const PANEL_TITLES: Record<Variant, string> = {
  depth_aware: "Depth-aware",
  rgb_only: "RGB-only",
};

export class App {
  session: Session | null = null;
  private base: RgbaBuffer | null = null;
  private readonly client: Client;
  private readonly storage: KeyValueStore | null;
  private readonly decodeFile: (file: File) => Promise<RgbaBuffer>;
  private readonly decodeB64: (b64: string) => Promise<RgbaBuffer>;
  private readonly canvases = {} as Record<Variant, HTMLCanvasElement>;
  private readonly captions = {} as Record<Variant, HTMLElement>;
  private readonly overlays: Partial<Record<Variant, RgbaBuffer>> = {};
  private readonly statusLine: HTMLElement;
  private queue: Promise<void> = Promise.resolve();

  constructor(private readonly opts: AppOptions) {
    this.client = new Client(opts.apiBase ?? "", opts.fetchFn);
    this.storage = opts.storage ?? (typeof localStorage !== "undefined" ? localStorage : null);
    this.decodeFile = opts.decodeFile ?? (async (f) => decodeViaCanvas(URL.createObjectURL(f)));
    this.decodeB64 = opts.decodeB64 ?? (async (b) => decodeViaCanvas(b64ToDataUrl(b)));

    const root = opts.root;
    root.innerHTML = `
      <header class="bar">
        <strong>depthseg</strong>
        <span id="model-line">fetching model info…</span>
      </header>
      <section class="bar controls">
        <label>image <input type="file" id="image-input" accept="image/*"></label>
        <label>depth <input type="file" id="depth-input" accept="image/*"></label>
        <span class="label-toggle">
          <label><input type="radio" name="click-label" id="label-fg" value="1" checked> foreground</label>
          <label><input type="radio" name="click-label" id="label-bg" value="0"> background</label>
        </span>
        <button id="undo-btn" disabled>undo click</button>
        <button id="clear-btn" disabled>clear clicks</button>
      </section>
      <section id="panels"></section>
      <p id="status" class="bar"></p>
    `;
    const panels = root.querySelector("#panels") as HTMLElement;
    for (const variant of VARIANTS) {
      const panel = document.createElement("figure");
      panel.className = "panel";
      panel.innerHTML = `
        <figcaption><strong>${PANEL_TITLES[variant]}</strong>
          <span class="caption" id="caption-${variant}">no prediction yet</span>
        </figcaption>
        <canvas id="canvas-${variant}" width="0" height="0"></canvas>
      `;
      panels.appendChild(panel);
      this.canvases[variant] = panel.querySelector("canvas") as HTMLCanvasElement;
      this.captions[variant] = panel.querySelector(`#caption-${variant}`) as HTMLElement;
    }
    this.statusLine = root.querySelector("#status") as HTMLElement;

    (root.querySelector("#image-input") as HTMLInputElement).addEventListener("change", (ev) =>
      this.enqueue(() => this.onImagePicked(ev.target as HTMLInputElement)),
    );
    (root.querySelector("#depth-input") as HTMLInputElement).addEventListener("change", (ev) =>
      this.enqueue(() => this.onDepthPicked(ev.target as HTMLInputElement)),
    );
    (root.querySelector("#undo-btn") as HTMLButtonElement).addEventListener("click", () =>
      this.enqueue(() => this.onUndo()),
    );
    (root.querySelector("#clear-btn") as HTMLButtonElement).addEventListener("click", () =>
      this.enqueue(() => this.onClear()),
    );
    for (const variant of VARIANTS) {
      // currentTarget is nulled once dispatch returns, and the handler runs
      // later from the queue, so bind the canvas here instead.
      const canvas = this.canvases[variant];
      canvas.addEventListener("click", (ev) =>
        this.enqueue(() => this.onCanvasClick(canvas, ev)),
      );
    }

    this.enqueue(() => this.showModelInfo());
    this.enqueue(() => this.restoreSavedSession());
  }

  /** Resolves once every queued action (uploads, clicks, replay) settled. */
  idle(): Promise<void> {
    return this.queue;
  }

  lastResult(variant: Variant): SegmentResult | undefined {
    return this.session?.cached(variant);
  }

  lastOverlay(variant: Variant): RgbaBuffer | undefined {
    return this.overlays[variant];
  }

  private enqueue(action: () => Promise<void>): void {
    this.queue = this.queue.then(action).catch((err) => this.report(err));
  }

  private report(err: unknown): void {
    const text =
      err instanceof ApiError
        ? `service error ${err.status}: ${err.message}${err.field ? ` (${err.field})` : ""}`
        : String(err);
    this.statusLine.textContent = text;
  }

  private setStatus(text: string): void {
    this.statusLine.textContent = text;
  }

  private async showModelInfo(): Promise<void> {
    const line = this.opts.root.querySelector("#model-line") as HTMLElement;
    try {
      const info = await this.client.modelInfo();
      const alpha = info.alpha === null ? "–" : info.alpha.toFixed(3);
      line.textContent =
        `preset ${info.preset} · ${(info.params / 1e3).toFixed(1)}k params · α=${alpha}`;
    } catch (err) {
      line.textContent = "model info unavailable";
      this.report(err);
    }
  }

  private async onImagePicked(input: HTMLInputElement): Promise<void> {
    const file = input.files?.[0];
    if (!file) return;
    const b64 = await fileToB64(file);
    this.base = await this.decodeFile(file);
    this.session = new Session(b64, null, file.name);
    this.persist();
    await this.refresh();
    this.setStatus(`loaded ${file.name} (${this.base.width}×${this.base.height}); click an object`);
  }

  private async onDepthPicked(input: HTMLInputElement): Promise<void> {
    const file = input.files?.[0];
    if (!file) return;
    if (!this.session || !this.base) {
      this.setStatus("upload an image before attaching depth");
      return;
    }
    const depth = await fileToB64(file);
    const fresh = new Session(this.session.image, depth, this.session.imageName);
    for (const click of this.session.clicks) fresh.addClick(click);
    this.session = fresh;
    this.persist();
    await this.refresh();
    this.setStatus(`attached depth map ${file.name}`);
  }

  private async onUndo(): Promise<void> {
    if (!this.session || !this.session.undo()) return;
    this.persist();
    await this.refresh();
    this.setStatus(`undid last click; ${this.session.clicks.length} remain`);
  }

  private async onClear(): Promise<void> {
    if (!this.session) return;
    this.session.clear();
    this.persist();
    await this.refresh();
    this.setStatus("cleared all clicks");
  }

  private async onCanvasClick(canvas: HTMLCanvasElement, ev: MouseEvent): Promise<void> {
    if (!this.session || !this.base) return;
    const rect = canvas.getBoundingClientRect();
    const scaleX = rect.width > 0 ? canvas.width / rect.width : 1;
    const scaleY = rect.height > 0 ? canvas.height / rect.height : 1;
    const x = Math.min(
      this.base.width - 1,
      Math.max(0, Math.round((ev.clientX - rect.left) * scaleX)),
    );
    const y = Math.min(
      this.base.height - 1,
      Math.max(0, Math.round((ev.clientY - rect.top) * scaleY)),
    );
    const fg = this.opts.root.querySelector("#label-fg") as HTMLInputElement;
    const click: Click = { x, y, label: fg.checked ? 1 : 0 };
    this.session.addClick(click);
    this.persist();
    await this.refresh();
  }

  /** Re-render both panels for the current click history, querying the
   * service only for histories it has not answered yet. */
  private async refresh(): Promise<void> {
    const session = this.session;
    if (!session || !this.base) return;
    const undoBtn = this.opts.root.querySelector("#undo-btn") as HTMLButtonElement;
    const clearBtn = this.opts.root.querySelector("#clear-btn") as HTMLButtonElement;
    undoBtn.disabled = clearBtn.disabled = session.clicks.length === 0;

    if (session.clicks.length === 0) {
      for (const variant of VARIANTS) {
        this.overlays[variant] = this.base;
        blit(this.canvases[variant], this.base);
        this.captions[variant].textContent = "no prediction yet";
      }
      return;
    }
    for (const variant of VARIANTS) {
      let result = session.cached(variant);
      if (!result) {
        result = await this.client.segment({
          image: session.image,
          ...(session.depth !== null ? { depth: session.depth } : {}),
          prompts: { points: clicksToPrompts(session.clicks), boxes: [] },
          variant,
          model_id: "default",
        });
        session.store(variant, result);
      }
      this.renderPanel(variant, result);
    }
  }

  private renderPanel(variant: Variant, result: SegmentResult): void {
    if (!this.base) return;
    const mask = decodeRleString(result.mask, result.height, result.width);
    const overlay = drawClickMarkers(
      composeOverlay(this.base, mask),
      this.session?.clicks ?? [],
    );
    this.overlays[variant] = overlay;
    blit(this.canvases[variant], overlay);
    const alpha = result.alpha === null ? "–" : result.alpha.toFixed(3);
    this.captions[variant].textContent =
      `predicted IoU ${result.predicted_iou.toFixed(3)} · α=${alpha} · ` +
      `${result.timing_ms.toFixed(0)} ms`;
    for (const warning of result.warnings) this.setStatus(warning);
  }

  /** Reload path: rebuild the saved session and replay its clicks in order,
   * re-issuing the same request sequence the live session produced. */
  private async restoreSavedSession(): Promise<void> {
    if (!this.storage) return;
    const saved = loadSession(this.storage);
    if (!saved) return;
    this.base = await this.decodeB64(saved.image);
    this.session = new Session(saved.image, saved.depth, saved.imageName);
    await this.refresh();
    for (const click of saved.clicks) {
      this.session.addClick(click);
      await this.refresh();
    }
    this.setStatus(
      `restored session for ${saved.imageName} (${saved.clicks.length} clicks replayed)`,
    );
  }

  private persist(): void {
    if (this.storage && this.session) saveSession(this.storage, this.session);
  }

  destroy(): void {
    this.opts.root.innerHTML = "";
  }
}

export function createApp(opts: AppOptions): App {
  return new App(opts);
}

export function resetSavedSession(store: KeyValueStore): void {
  clearSavedSession(store);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  createApp({ root: document.getElementById("app") as HTMLElement });
}
