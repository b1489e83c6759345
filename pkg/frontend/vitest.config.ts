import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // every wrapper call spawns a Python process, so tests are I/O bound
    testTimeout: 120_000,
    pool: "forks",
  },
});
