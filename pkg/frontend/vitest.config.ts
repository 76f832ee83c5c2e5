import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // Integration tests spawn the backing service and run full campaigns.
    testTimeout: 120_000,
    hookTimeout: 120_000,
    pool: "forks",
  },
});
