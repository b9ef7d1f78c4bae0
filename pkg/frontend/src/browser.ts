/**
 * jsdom-backed page sessions: navigation, click replay, live-DOM capture.
 *
 * jsdom executes inline scripts and click handlers, which is what runtime-
 * created forms need; it is not a pixel browser, so "network idle" reduces
 * to the window load event plus a short settle delay for queued timers.
 */
import { JSDOM, VirtualConsole } from "jsdom";
import { ClickablePayload, SnapshotPayload } from "./codec";

const SETTLE_MS = 60; // lets setTimeout(0)-style scripts run after load/click
const DEFAULT_TIMEOUT_MS = 30000;

export class NavigationError extends Error {}
export class ClickTargetError extends Error {
  constructor(public locator: string) {
    super(`click target not found: ${locator}`);
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitForLoad(dom: JSDOM, timeoutMs: number): Promise<void> {
  const doc = dom.window.document;
  if (doc.readyState === "complete") return;
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(
      () => reject(new NavigationError("navigation timeout")),
      timeoutMs,
    );
    dom.window.addEventListener("load", () => {
      clearTimeout(timer);
      resolve();
    });
  });
}

export async function loadPage(
  url: string,
  timeoutMs: number = DEFAULT_TIMEOUT_MS,
): Promise<JSDOM> {
  const virtualConsole = new VirtualConsole(); // page script errors stay quiet
  let dom: JSDOM;
  try {
    dom = await JSDOM.fromURL(url, {
      runScripts: "dangerously",
      resources: "usable",
      pretendToBeVisual: true,
      virtualConsole,
    });
  } catch (exc) {
    throw new NavigationError(`navigation failed: ${exc}`);
  }
  await waitForLoad(dom, timeoutMs || DEFAULT_TIMEOUT_MS);
  await sleep(SETTLE_MS);
  return dom;
}

/**
 * Root-to-node path of tag[element-sibling-index] steps, '/'-separated.
 * Locators are stable for pages loaded by this runtime; they are not
 * portable to parsers that do not synthesize implied elements (head, tbody).
 */
export function locatorOf(el: Element): string {
  const steps: string[] = [];
  let node: Element | null = el;
  while (node) {
    const parent: Element | null = node.parentElement;
    const siblings = parent
      ? Array.from(parent.children)
      : Array.from(node.ownerDocument.children);
    steps.push(`${node.tagName.toLowerCase()}[${siblings.indexOf(node)}]`);
    node = parent;
  }
  return steps.reverse().join("/");
}

export function resolveLocator(dom: JSDOM, locator: string): Element | null {
  let children: Element[] = Array.from(dom.window.document.children);
  let node: Element | null = null;
  for (const step of locator.split("/")) {
    const match = /^([^[]+)\[(\d+)\]$/.exec(step);
    if (!match) return null;
    const [, tag, idxText] = match;
    const idx = Number(idxText);
    if (idx >= children.length) return null;
    node = children[idx];
    if (node.tagName.toLowerCase() !== tag) return null;
    children = Array.from(node.children);
  }
  return node;
}

export async function replayClicks(dom: JSDOM, clicks: string[]): Promise<void> {
  for (const locator of clicks) {
    const target = resolveLocator(dom, locator);
    if (!target) {
      throw new ClickTargetError(locator);
    }
    const clickable = target as unknown as { click?: () => void };
    if (typeof clickable.click === "function") {
      clickable.click(); // dispatches the click event itself
    } else {
      target.dispatchEvent(
        new dom.window.Event("click", { bubbles: true, cancelable: true }),
      );
    }
    await sleep(SETTLE_MS);
  }
}

export function snapshotOf(dom: JSDOM): SnapshotPayload {
  const doc = dom.window.document;
  return {
    final_url: dom.window.location.href,
    title: doc.title ?? "",
    html: dom.serialize(),
    lang_attr: doc.documentElement.getAttribute("lang"),
    capability: "dynamic",
  };
}

export function enumerateClickables(dom: JSDOM): ClickablePayload[] {
  const out: ClickablePayload[] = [];
  const doc = dom.window.document;
  for (const el of Array.from(doc.querySelectorAll("*"))) {
    const text = (el.textContent ?? "").split(/\s+/).filter(Boolean).join(" ");
    const tag = el.tagName.toLowerCase();
    if (tag === "a" && el.hasAttribute("href")) {
      out.push({
        locator: locatorOf(el),
        text,
        kind: "hyperlink",
        target_url: (el as unknown as { href: string }).href ?? null,
      });
    } else if (tag === "button" || el.hasAttribute("onclick")) {
      out.push({
        locator: locatorOf(el),
        text,
        kind: "button_like",
        target_url: null,
      });
    }
  }
  return out;
}
