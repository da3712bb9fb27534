/** Thin typed client for the segmentation service.
 *
 * The service is stateless: every /segment call carries the complete prompt
 * history, so refinement, undo, and replay are all client-side concerns.
 */

export type Variant = "depth_aware" | "rgb_only";
export const VARIANTS: Variant[] = ["depth_aware", "rgb_only"];

/** (x, y, label) with label 1 = foreground, 0 = background. */
export type PointPrompt = [number, number, number];

export interface SegmentRequestBody {
  image: string;
  depth?: string;
  prompts: { points: PointPrompt[]; boxes: [number, number, number, number][] };
  variant: Variant;
  model_id: string;
}

export interface SegmentResult {
  mask: string;
  height: number;
  width: number;
  predicted_iou: number;
  alpha: number | null;
  timing_ms: number;
  warnings: string[];
}

export interface VariantInfo {
  params: number;
  macs: number;
  alpha: number | null;
  preset: string;
}

export interface ModelInfo extends VariantInfo {
  variants: Record<string, VariantInfo | null>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly field?: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let message = `${resp.status}`;
  let field: string | undefined;
  try {
    const body = (await resp.json()) as { error?: string; field?: string };
    if (body.error) message = body.error;
    field = body.field;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, message, field);
}

export class Client {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async modelInfo(modelId = "default"): Promise<ModelInfo> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/model-info?model_id=${encodeURIComponent(modelId)}`,
    );
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as ModelInfo;
  }

  async segment(body: SegmentRequestBody): Promise<SegmentResult> {
    const resp = await this.fetchFn(`${this.baseUrl}/segment`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as SegmentResult;
  }
}
