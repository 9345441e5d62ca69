import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // session tests drive a live gateway subprocess
    testTimeout: 120_000,
    hookTimeout: 30_000,
  },
});
