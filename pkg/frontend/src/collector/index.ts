/** Embeddable entry point: exposes the collector on the page as
 * `window.ForumTrace.attach({...})`. Bundled as a single IIFE script. */

import { attach, Collector, AttachFailedError } from "./collector";
import type { CollectorConfig } from "./collector";

declare global {
  interface Window {
    ForumTrace?: {
      attach: (config: CollectorConfig) => Collector;
      AttachFailedError: typeof AttachFailedError;
    };
  }
}

if (typeof window !== "undefined") {
  window.ForumTrace = { attach, AttachFailedError };
}

export { attach, Collector, AttachFailedError };
export type { CollectorConfig };
