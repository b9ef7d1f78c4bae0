/**
 * Wire protocol codec.
 *
 * Framing: each message is a UTF-8 JSON payload preceded by its byte length
 * in ASCII decimal and one "\n". Field names and shapes are bit-exact with
 * the Python side; serialization uses sorted keys and no whitespace so that
 * serialize(parse(x)) === x for every valid message.
 */

export const REQUEST_OPS = ["load", "enumerate"] as const;
export const RESPONSE_STATUSES = ["ok", "error", "unsupported"] as const;

export type RequestOp = (typeof REQUEST_OPS)[number];
export type ResponseStatus = (typeof RESPONSE_STATUSES)[number];

export interface AdapterRequest {
  op: RequestOp;
  start_url: string | null;
  clicks: string[];
  timeout_ms: number;
}

export interface SnapshotPayload {
  final_url: string;
  title: string;
  html: string;
  lang_attr: string | null;
  capability: string;
}

export interface ClickablePayload {
  locator: string;
  text: string;
  kind: "hyperlink" | "button_like";
  target_url: string | null;
}

export interface AdapterResponse {
  status: ResponseStatus;
  snapshot: SnapshotPayload | null;
  clickables: ClickablePayload[];
  error_detail: string | null;
}

export class ProtocolError extends Error {}

/** JSON.stringify with object keys sorted at every level, no whitespace. */
export function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(stableStringify).join(",") + "]";
  }
  const entries = Object.keys(value as Record<string, unknown>)
    .sort()
    .map((k) => JSON.stringify(k) + ":" +
      stableStringify((value as Record<string, unknown>)[k]));
  return "{" + entries.join(",") + "}";
}

export function encodeFrame(message: unknown): Buffer {
  const payload = Buffer.from(stableStringify(message), "utf8");
  return Buffer.concat([Buffer.from(`${payload.length}\n`, "ascii"), payload]);
}

function isString(x: unknown): x is string {
  return typeof x === "string";
}

function isInt(x: unknown): x is number {
  return typeof x === "number" && Number.isInteger(x);
}

export function parseRequest(obj: unknown): AdapterRequest {
  if (obj === null || typeof obj !== "object" || Array.isArray(obj)) {
    throw new ProtocolError("request must be an object");
  }
  const rec = obj as Record<string, unknown>;
  const op = rec.op;
  if (op !== "load" && op !== "enumerate") {
    throw new ProtocolError(`unknown op ${JSON.stringify(op)}`);
  }
  const startUrl = rec.start_url ?? null;
  if (startUrl !== null && !isString(startUrl)) {
    throw new ProtocolError("start_url must be a string or null");
  }
  if (op === "load" && !startUrl) {
    throw new ProtocolError("op=load requires start_url");
  }
  const clicks = rec.clicks ?? [];
  if (!Array.isArray(clicks) || clicks.some((c) => !isString(c))) {
    throw new ProtocolError("clicks must be a list of strings");
  }
  const timeout = rec.timeout_ms;
  if (!isInt(timeout) || timeout < 0) {
    throw new ProtocolError("timeout_ms must be a non-negative integer");
  }
  return { op, start_url: startUrl, clicks: clicks as string[], timeout_ms: timeout };
}

export function serializeRequest(request: AdapterRequest): Record<string, unknown> {
  return {
    op: request.op,
    start_url: request.start_url,
    clicks: request.clicks,
    timeout_ms: request.timeout_ms,
  };
}

export function parseResponse(obj: unknown): AdapterResponse {
  if (obj === null || typeof obj !== "object" || Array.isArray(obj)) {
    throw new ProtocolError("response must be an object");
  }
  const rec = obj as Record<string, unknown>;
  const status = rec.status;
  if (status !== "ok" && status !== "error" && status !== "unsupported") {
    throw new ProtocolError(`unknown status ${JSON.stringify(status)}`);
  }
  let snapshot: SnapshotPayload | null = null;
  if (status === "ok") {
    const snap = rec.snapshot;
    if (snap === null || typeof snap !== "object") {
      throw new ProtocolError("status=ok requires a snapshot");
    }
    const s = snap as Record<string, unknown>;
    for (const key of ["final_url", "title", "html", "capability"]) {
      if (!isString(s[key])) {
        throw new ProtocolError(`snapshot.${key} must be a string`);
      }
    }
    const lang = s.lang_attr ?? null;
    if (lang !== null && !isString(lang)) {
      throw new ProtocolError("snapshot.lang_attr must be a string or null");
    }
    snapshot = {
      final_url: s.final_url as string,
      title: s.title as string,
      html: s.html as string,
      lang_attr: lang,
      capability: s.capability as string,
    };
  } else if (rec.snapshot != null) {
    throw new ProtocolError("snapshot only allowed with status=ok");
  }
  const rawClickables = rec.clickables ?? [];
  if (!Array.isArray(rawClickables)) {
    throw new ProtocolError("clickables must be a list");
  }
  const clickables: ClickablePayload[] = rawClickables.map((c) => {
    if (c === null || typeof c !== "object") {
      throw new ProtocolError("clickable must be an object");
    }
    const cc = c as Record<string, unknown>;
    for (const key of ["locator", "text", "kind"]) {
      if (!isString(cc[key])) {
        throw new ProtocolError(`clickable.${key} must be a string`);
      }
    }
    if (cc.kind !== "hyperlink" && cc.kind !== "button_like") {
      throw new ProtocolError(`bad clickable kind ${JSON.stringify(cc.kind)}`);
    }
    const target = cc.target_url ?? null;
    if (target !== null && !isString(target)) {
      throw new ProtocolError("clickable.target_url must be a string or null");
    }
    if (cc.kind === "hyperlink" && target === null) {
      throw new ProtocolError("hyperlink clickable requires target_url");
    }
    return {
      locator: cc.locator as string,
      text: cc.text as string,
      kind: cc.kind as "hyperlink" | "button_like",
      target_url: target,
    };
  });
  const detail = rec.error_detail ?? null;
  if (detail !== null && !isString(detail)) {
    throw new ProtocolError("error_detail must be a string or null");
  }
  return { status, snapshot, clickables, error_detail: detail };
}

export function serializeResponse(response: AdapterResponse): Record<string, unknown> {
  return {
    status: response.status,
    snapshot: response.snapshot,
    clickables: response.clickables,
    error_detail: response.error_detail,
  };
}

/**
 * Incremental frame reader: feed arbitrary byte chunks, get parsed JSON
 * messages out. On a corrupt header line the parser reports one error and
 * resynchronizes at the next newline, so the stream session survives.
 */
export class FrameParser {
  private buffer = Buffer.alloc(0);
  private expected = -1;

  feed(chunk: Buffer): Array<{ message?: unknown; error?: string }> {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    const out: Array<{ message?: unknown; error?: string }> = [];
    for (;;) {
      if (this.expected < 0) {
        const nl = this.buffer.indexOf(0x0a);
        if (nl < 0) {
          if (this.buffer.length > 20) {
            out.push({ error: "unreasonable frame header" });
            this.buffer = Buffer.alloc(0);
          }
          break;
        }
        const header = this.buffer.subarray(0, nl).toString("ascii");
        this.buffer = this.buffer.subarray(nl + 1);
        const length = Number(header);
        if (!/^\d+$/.test(header.trim()) || !Number.isInteger(length)) {
          out.push({ error: `bad frame length ${JSON.stringify(header)}` });
          continue; // resync at the next newline
        }
        this.expected = length;
      }
      if (this.buffer.length < this.expected) break;
      const payload = this.buffer.subarray(0, this.expected);
      this.buffer = this.buffer.subarray(this.expected);
      this.expected = -1;
      try {
        out.push({ message: JSON.parse(payload.toString("utf8")) });
      } catch (exc) {
        out.push({ error: `bad frame payload: ${exc}` });
      }
    }
    return out;
  }
}
