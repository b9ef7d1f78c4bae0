/**
 * Adapter server: reads framed requests from a stream, loads pages with the
 * jsdom runtime, replays clicks, and answers with live-DOM snapshots.
 */
import { Readable, Writable } from "node:stream";
import {
  AdapterRequest,
  AdapterResponse,
  FrameParser,
  ProtocolError,
  encodeFrame,
  parseRequest,
  serializeResponse,
} from "./codec";
import {
  ClickTargetError,
  NavigationError,
  enumerateClickables,
  loadPage,
  replayClicks,
  snapshotOf,
} from "./browser";

function errorResponse(detail: string): AdapterResponse {
  return { status: "error", snapshot: null, clickables: [], error_detail: detail };
}

export async function handleRequest(request: AdapterRequest): Promise<AdapterResponse> {
  try {
    const dom = await loadPage(request.start_url as string, request.timeout_ms);
    try {
      await replayClicks(dom, request.clicks);
      const response: AdapterResponse = {
        status: "ok",
        snapshot: snapshotOf(dom),
        clickables: enumerateClickables(dom),
        error_detail: null,
      };
      return response;
    } finally {
      dom.window.close();
    }
  } catch (exc) {
    if (exc instanceof ClickTargetError || exc instanceof NavigationError) {
      return errorResponse(exc.message);
    }
    return errorResponse(`adapter failure: ${exc}`);
  }
}

export async function handleMessage(message: unknown): Promise<AdapterResponse> {
  let request: AdapterRequest;
  try {
    request = parseRequest(message);
  } catch (exc) {
    if (exc instanceof ProtocolError) {
      return errorResponse(exc.message);
    }
    throw exc;
  }
  return handleRequest(request);
}

/**
 * Serve until the input stream ends. Requests are answered in arrival
 * order; malformed frames or JSON produce an error response and the
 * session stays alive.
 */
export async function serve(input: Readable, output: Writable): Promise<void> {
  const parser = new FrameParser();
  let queue: Promise<void> = Promise.resolve();

  const write = (response: AdapterResponse) => {
    output.write(encodeFrame(serializeResponse(response)));
  };

  await new Promise<void>((resolve) => {
    input.on("data", (chunk: Buffer) => {
      for (const item of parser.feed(chunk)) {
        if (item.error !== undefined) {
          const detail = item.error;
          queue = queue.then(() => write(errorResponse(detail)));
        } else {
          const message = item.message;
          queue = queue
            .then(() => handleMessage(message))
            .then(write)
            .catch((exc) => write(errorResponse(`internal error: ${exc}`)));
        }
      }
    });
    input.on("end", () => {
      queue.then(resolve, () => resolve());
    });
    input.on("error", () => resolve());
  });
}
