/** Client-side session state: the uploaded image, the click history, and a
 * cache of per-variant results keyed by prompt history.
 *
 * Because the service is stateless and deterministic, the prompt list fully
 * determines the mask; undo therefore never needs a network round-trip (the
 * shorter history was already answered), and replaying a saved session must
 * reproduce byte-identical masks.
 */

import type { PointPrompt, SegmentResult, Variant } from "./api.js";

export interface Click {
  x: number;
  y: number;
  label: 0 | 1;
}

export interface SessionSnapshot {
  image: string; // base64 PNG, as sent to the service
  depth: string | null;
  imageName: string;
  clicks: Click[];
}

export function clicksToPrompts(clicks: Click[]): PointPrompt[] {
  return clicks.map((c) => [c.x, c.y, c.label]);
}

export class Session {
  readonly clicks: Click[] = [];
  private readonly results = new Map<string, SegmentResult>();

  constructor(
    readonly image: string,
    readonly depth: string | null,
    readonly imageName: string,
  ) {}

  /** Cache key for a variant under the current (or given) click history. */
  key(variant: Variant, clicks: Click[] = this.clicks): string {
    return `${variant}|${JSON.stringify(clicksToPrompts(clicks))}`;
  }

  addClick(click: Click): void {
    this.clicks.push(click);
  }

  /** Remove the most recent click; returns false on an empty history. */
  undo(): boolean {
    return this.clicks.pop() !== undefined;
  }

  clear(): void {
    this.clicks.length = 0;
  }

  cached(variant: Variant): SegmentResult | undefined {
    return this.results.get(this.key(variant));
  }

  store(variant: Variant, result: SegmentResult): void {
    this.results.set(this.key(variant), result);
  }

  snapshot(): SessionSnapshot {
    return {
      image: this.image,
      depth: this.depth,
      imageName: this.imageName,
      clicks: this.clicks.map((c) => ({ ...c })),
    };
  }

  static fromSnapshot(snap: SessionSnapshot): Session {
    const session = new Session(snap.image, snap.depth, snap.imageName);
    for (const click of snap.clicks) session.addClick({ ...click });
    return session;
  }
}

const STORAGE_KEY = "depthseg.session";

/** Minimal slice of the Storage interface the app relies on. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function saveSession(store: KeyValueStore, session: Session): void {
  store.setItem(STORAGE_KEY, JSON.stringify(session.snapshot()));
}

export function loadSession(store: KeyValueStore): Session | null {
  const raw = store.getItem(STORAGE_KEY);
  if (raw === null) return null;
  try {
    const snap = JSON.parse(raw) as SessionSnapshot;
    if (typeof snap.image !== "string" || !Array.isArray(snap.clicks)) return null;
    return Session.fromSnapshot(snap);
  } catch {
    return null;
  }
}

export function clearSavedSession(store: KeyValueStore): void {
  store.removeItem(STORAGE_KEY);
}
