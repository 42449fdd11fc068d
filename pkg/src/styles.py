"""
Custom CSS for the run dashboard.
"""

LEVEL_COLORS = {
    "safe": "#34a853",
    "caution": "#fbbc04",
    "imminent": "#ea4335",
}

DASHBOARD_STYLE = """
<style>
    .main .block-container {
        padding-top: 2rem;
        padding-bottom: 2rem;
        max-width: 1400px;
    }

    h1 {
        color: #1a73e8;
        font-size: 1.75rem;
        font-weight: 400;
        margin: 0;
    }

    h3 {
        color: #5f6368;
        font-size: 1.125rem;
        font-weight: 500;
        margin-top: 1.25rem;
    }

    .page-header {
        padding: 1.5rem 0;
        border-bottom: 1px solid #dadce0;
        margin-bottom: 2rem;
    }

    .page-header p {
        color: #5f6368;
        margin: 0.5rem 0 0 0;
        font-size: 0.875rem;
    }

    .stDataFrame {
        border: 1px solid #dadce0;
        border-radius: 8px;
    }

    .stDownloadButton > button {
        background-color: #ffffff;
        color: #1a73e8;
        border: 1px solid #dadce0;
        border-radius: 4px;
    }

    .notice {
        border-radius: 4px;
        padding: 0.75rem 1rem;
        margin: 0.75rem 0;
    }

    .notice-info {
        background-color: #e8f0fe;
        border-left: 4px solid #1a73e8;
    }

    .notice-warning {
        background-color: #fef7e0;
        border-left: 4px solid #fbbc04;
    }

    .alert-chip {
        color: #ffffff;
        border-radius: 12px;
        padding: 0.25rem 0.75rem;
        font-weight: 500;
    }

    #MainMenu {visibility: hidden;}
    footer {visibility: hidden;}
</style>
"""
