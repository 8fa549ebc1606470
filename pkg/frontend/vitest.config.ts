import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // The acceptance suite prints one verdict line; send it straight to the
    // terminal instead of the reporter's collapsed console buffer.
    disableConsoleIntercept: true,
  },
});
