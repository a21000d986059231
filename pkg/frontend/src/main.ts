import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

const base = new URLSearchParams(location.search).get("api") ?? "";
createApp(document, new ApiClient(base));
