import { defineConfig } from "vite";

export default defineConfig({
  server: {
    proxy: {
      // the session API served by `driftlab serve`
      "/v1": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
  },
});
