import { defineConfig } from "vitest/config";

// The reshaping service does not send CORS headers, so the dev server
// proxies API routes to it and the browser stays same-origin.
const service = process.env.BODYFLOW_URL ?? "http://127.0.0.1:8000";

export default defineConfig({
  server: {
    proxy: {
      "/sessions": service,
      "/healthz": service,
    },
  },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
  },
});
